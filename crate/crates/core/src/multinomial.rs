//! Goodness-of-fit tests for multinomial cell counts: Pearson's χ², Nass'
//! moment-matched correction, and the likelihood-ratio test.

use alloc::format;

use crate::error::{Error, Result};
use crate::math::{chi2_quantile, chi2_sf, log};

/// Expected counts below this make the statistics meaningless.
pub const MIN_EXPECTED_COUNT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    Pearson,
    Nass,
    Lrt,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::Pearson, TestKind::Nass, TestKind::Lrt];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Pearson => "pearson",
            Self::Nass => "nass",
            Self::Lrt => "lrt",
        }
    }
}

impl core::fmt::Display for TestKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(Self::Pearson),
            "nass" => Ok(Self::Nass),
            "lrt" => Ok(Self::Lrt),
            other => Err(Error::InvalidConfiguration(format!(
                "unknown test '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub kind: TestKind,
    /// `S`, `c·S` for Nass, or `R`
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
    pub reject: bool,
}

fn check_inputs(o: &[u64], p: &[f64], n: u64) -> Result<()> {
    if o.len() != p.len() {
        return Err(Error::LengthMismatch {
            what: "cell counts and probabilities",
            left: o.len(),
            right: p.len(),
        });
    }
    if o.len() < 2 {
        return Err(Error::InvalidConfiguration(
            "need at least two cells".into(),
        ));
    }
    let total: u64 = o.iter().sum();
    if total != n {
        return Err(Error::InvalidConfiguration(format!(
            "cell counts sum to {total}, expected {n}"
        )));
    }
    let nf = n as f64;
    for (cell, &pk) in p.iter().enumerate() {
        let expected = nf * pk;
        if !(expected >= MIN_EXPECTED_COUNT) {
            return Err(Error::IllConditionedCells { cell, expected });
        }
    }
    Ok(())
}

fn pearson_statistic(o: &[u64], p: &[f64], n: f64) -> f64 {
    o.iter()
        .zip(p)
        .map(|(&ok, &pk)| {
            let e = n * pk;
            let d = ok as f64 - e;
            d * d / e
        })
        .sum()
}

fn lrt_statistic(o: &[u64], p: &[f64], n: f64) -> f64 {
    2.0 * o
        .iter()
        .zip(p)
        .filter(|(&ok, _)| ok > 0)
        .map(|(&ok, &pk)| {
            let ok = ok as f64;
            ok * log(ok / (n * pk))
        })
        .sum::<f64>()
}

/// `(c, ν)` of the Nass correction.
fn nass_scaling(p: &[f64], n: f64) -> Result<(f64, f64)> {
    let m1 = (p.len() - 1) as f64; // m + 1
    let m = m1 - 1.0;
    let inv_sum: f64 = p.iter().map(|&pk| 1.0 / (n * pk)).sum();
    let var = 2.0 * m1 - (m * m + 6.0 * m + 6.0) / n + inv_sum;
    if !(var > 0.0) {
        return Err(Error::InvalidConfiguration(format!(
            "Nass variance {var} is not positive"
        )));
    }
    let c = 2.0 * m1 / var;
    Ok((c, c * m1))
}

/// Pearson's χ² with `m + 1` degrees of freedom.
pub fn pearson(o: &[u64], p: &[f64], n: u64, kappa: f64) -> Result<TestResult> {
    check_inputs(o, p, n)?;
    let dof = (p.len() - 1) as f64;
    let s = pearson_statistic(o, p, n as f64);
    Ok(TestResult {
        kind: TestKind::Pearson,
        statistic: s,
        dof,
        p_value: chi2_sf(s, dof),
        reject: s > chi2_quantile(1.0 - kappa, dof),
    })
}

/// Nass: `c·S` against `χ²_ν` with `c = 2E[S]/Var(S)`, `ν = c·E[S]`.
pub fn nass(o: &[u64], p: &[f64], n: u64, kappa: f64) -> Result<TestResult> {
    check_inputs(o, p, n)?;
    let (c, nu) = nass_scaling(p, n as f64)?;
    let cs = c * pearson_statistic(o, p, n as f64);
    Ok(TestResult {
        kind: TestKind::Nass,
        statistic: cs,
        dof: nu,
        p_value: chi2_sf(cs, nu),
        reject: cs > chi2_quantile(1.0 - kappa, nu),
    })
}

/// Likelihood ratio `R = 2 Σ O_k log(O_k / (n p_k))`, with `0 log 0 = 0`.
pub fn lrt(o: &[u64], p: &[f64], n: u64, kappa: f64) -> Result<TestResult> {
    check_inputs(o, p, n)?;
    let dof = (p.len() - 1) as f64;
    let r = lrt_statistic(o, p, n as f64);
    Ok(TestResult {
        kind: TestKind::Lrt,
        statistic: r,
        dof,
        p_value: chi2_sf(r, dof),
        reject: r > chi2_quantile(1.0 - kappa, dof),
    })
}

/// Rejection thresholds for fixed `(p, n, κ)`, so that repeated evaluation
/// in a simulation study needs no quantile inversions.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPlan {
    p: alloc::vec::Vec<f64>,
    n: u64,
    kappa: f64,
    chi2_threshold: f64,
    nass_c: f64,
    nass_nu: f64,
    nass_threshold: f64,
}

impl TestPlan {
    pub fn new(p: &[f64], n: u64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidConfiguration(format!(
                "level {kappa} outside (0, 1)"
            )));
        }
        if p.len() < 2 {
            return Err(Error::InvalidConfiguration(
                "need at least two cells".into(),
            ));
        }
        let nf = n as f64;
        for (cell, &pk) in p.iter().enumerate() {
            let expected = nf * pk;
            if !(expected >= MIN_EXPECTED_COUNT) {
                return Err(Error::IllConditionedCells { cell, expected });
            }
        }
        let dof = (p.len() - 1) as f64;
        let (nass_c, nass_nu) = nass_scaling(p, nf)?;
        Ok(Self {
            p: p.to_vec(),
            n,
            kappa,
            chi2_threshold: chi2_quantile(1.0 - kappa, dof),
            nass_c,
            nass_nu,
            nass_threshold: chi2_quantile(1.0 - kappa, nass_nu),
        })
    }

    pub fn nass_scaling(&self) -> (f64, f64) {
        (self.nass_c, self.nass_nu)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Rejections in [`TestKind::ALL`] order.
    pub fn rejects(&self, o: &[u64]) -> [bool; 3] {
        debug_assert_eq!(o.len(), self.p.len());
        let n = self.n as f64;
        let s = pearson_statistic(o, &self.p, n);
        let r = lrt_statistic(o, &self.p, n);
        [
            s > self.chi2_threshold,
            self.nass_c * s > self.nass_threshold,
            r > self.chi2_threshold,
        ]
    }

    /// Full results in [`TestKind::ALL`] order.
    pub fn results(&self, o: &[u64]) -> Result<[TestResult; 3]> {
        Ok([
            pearson(o, &self.p, self.n, self.kappa)?,
            nass(o, &self.p, self.n, self.kappa)?,
            lrt(o, &self.p, self.n, self.kappa)?,
        ])
    }
}
