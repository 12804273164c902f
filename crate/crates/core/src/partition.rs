//! Partitions of `[0,1]` into strata and the multinomial null cell
//! probabilities of the randomized backtest.

use alloc::format;
use alloc::vec::Vec;

use crate::distortion::DistortionFunction;
use crate::error::{invalid, Error, Result};
use crate::glaw::GLaw;
use crate::rng::{Purpose, StreamFamily};
use crate::sampler::GMixture;

/// Cell probabilities below this are set to zero and flagged.
pub const MIN_CELL_PROBABILITY: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Closure {
    /// strata `[α_{j-1}, α_j)`
    LeftClosed,
    /// strata `(α_{j-1}, α_j]`
    RightClosed,
}

/// Which variant of the method is run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// left-continuous if possible, then right-continuous, else general
    Auto,
    Left,
    Right,
    General,
}

impl Mode {
    pub fn resolve(self, g: &DistortionFunction) -> Mode {
        match self {
            Mode::Auto if g.is_left_continuous() => Mode::Left,
            Mode::Auto if g.is_right_continuous() => Mode::Right,
            Mode::Auto => Mode::General,
            other => other,
        }
    }

    /// Closure used by a resolved mode. Under the general method's continuity
    /// requirement both conventions give the same law.
    pub fn closure(self) -> Closure {
        match self {
            Mode::Right => Closure::RightClosed,
            _ => Closure::LeftClosed,
        }
    }
}

impl core::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Mode::Auto),
            "left" | "left-cont" => Ok(Mode::Left),
            "right" | "right-cont" => Ok(Mode::Right),
            "general" => Ok(Mode::General),
            other => Err(invalid(format!("unknown mode '{other}'"))),
        }
    }
}

impl core::fmt::Display for Mode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Mode::Auto => "auto",
            Mode::Left => "left",
            Mode::Right => "right",
            Mode::General => "general",
        })
    }
}

/// Levels `0 = α_0 < α_1 < … < α_{m+1} = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    levels: Vec<f64>,
}

impl Partition {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 || levels[0] != 0.0 || levels[levels.len() - 1] != 1.0 {
            return Err(invalid("partition must start at 0 and end at 1"));
        }
        if levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("partition levels must increase strictly"));
        }
        Ok(Self { levels })
    }

    /// Builds `0, inner..., 1`.
    pub fn from_inner(inner: &[f64]) -> Result<Self> {
        let mut levels = Vec::with_capacity(inner.len() + 2);
        levels.push(0.0);
        levels.extend_from_slice(inner);
        levels.push(1.0);
        Self::new(levels)
    }

    /// `α_j = jα/(m+1)` for `j = 1..m`, then 1.
    pub fn tail_equidistant(alpha: f64, m: usize) -> Result<Self> {
        check_level(alpha)?;
        let inner: Vec<f64> = (1..=m)
            .map(|j| j as f64 * alpha / (m as f64 + 1.0))
            .collect();
        Self::from_inner(&inner)
    }

    /// `α_j = jα/m` for `j = 1..m`, so that `α_m = α`, then 1.
    pub fn tail_equidistant_inclusive(alpha: f64, m: usize) -> Result<Self> {
        check_level(alpha)?;
        let inner: Vec<f64> = (1..=m).map(|j| j as f64 * alpha / m as f64).collect();
        Self::from_inner(&inner)
    }

    /// `α_i = β + (α-β) i/(m+1)` for `i = 1..m`, then 1.
    pub fn range_equidistant(beta: f64, alpha: f64, m: usize) -> Result<Self> {
        check_level(alpha)?;
        if !(0.0..alpha).contains(&beta) {
            return Err(invalid(format!(
                "need 0 <= beta < alpha, got beta = {beta}"
            )));
        }
        let inner: Vec<f64> = (1..=m)
            .map(|i| beta + (alpha - beta) * i as f64 / (m as f64 + 1.0))
            .collect();
        Self::from_inner(&inner)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Number of interior levels; there are `m + 1` strata and `m + 2` cells.
    pub fn m(&self) -> usize {
        self.levels.len() - 2
    }

    /// `(α_{j-1}, α_j)` for `j = 1..=m+1`.
    pub fn strata(&self) -> impl ExactSizeIterator<Item = (f64, f64)> + '_ {
        self.levels.windows(2).map(|w| (w[0], w[1]))
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("level must lie in (0, 1), got {alpha}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// stratum `j` (1-based) has no probability mass
    ZeroMass,
    /// `g` jumps at level `α_j`
    Discontinuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

/// Checks the requirements of `mode`; an empty list means the partition is
/// usable.
pub fn validate_partition(g: &DistortionFunction, part: &Partition, mode: Mode) -> Vec<Violation> {
    let mode = mode.resolve(g);
    let law = GLaw::new(g);
    let mut out = Vec::new();
    for (j, (a, b)) in part.strata().enumerate() {
        if law.mass(a, b, mode.closure()) <= 0.0 {
            out.push(Violation {
                index: j + 1,
                kind: ViolationKind::ZeroMass,
            });
        }
    }
    if mode == Mode::General {
        for (j, &alpha) in part.levels().iter().enumerate().skip(1) {
            if !g.is_continuous_at(alpha) {
                out.push(Violation {
                    index: j,
                    kind: ViolationKind::Discontinuous,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    GenericIntegral,
    MonteCarlo,
}

/// `(p_0, …, p_{m+1})`: `p_k` is the null probability of exactly `k`
/// breached levels.
#[derive(Debug, Clone, PartialEq)]
pub struct CellProbabilities {
    pub p: Vec<f64>,
    pub provenance: Provenance,
    /// Some cell was below [`MIN_CELL_PROBABILITY`] and was set to 0.
    pub ill_conditioned: bool,
    /// Monte Carlo standard errors, per cell.
    pub se: Option<Vec<f64>>,
}

impl CellProbabilities {
    pub(crate) fn exact(mut p: Vec<f64>, provenance: Provenance) -> Self {
        let mut ill_conditioned = false;
        for v in &mut p {
            if *v < MIN_CELL_PROBABILITY {
                *v = 0.0;
                ill_conditioned = true;
            }
        }
        Self {
            p,
            provenance,
            ill_conditioned,
            se: None,
        }
    }

    /// `P(X <= k)` for each `k`.
    pub fn cdf(&self) -> Vec<f64> {
        self.p
            .iter()
            .scan(0.0, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }
}

/// Conditional means `e_j = E[G | G ∈ stratum j]`, `j = 1..=m+1`.
pub fn stratum_means(g: &DistortionFunction, part: &Partition, mode: Mode) -> Result<Vec<f64>> {
    let mode = mode.resolve(g);
    let violations = validate_partition(g, part, mode);
    if !violations.is_empty() {
        return Err(Error::PartitionInvalid(violations));
    }
    let law = GLaw::new(g);
    let closure = mode.closure();
    Ok(part
        .strata()
        .map(|(a, b)| law.partial_mean(a, b, closure) / law.mass(a, b, closure))
        .collect())
}

/// Null cell probabilities from exact stratum means:
/// `p_0 = 1 - e_{m+1}`, `p_k = e_{m+2-k} - e_{m+1-k}`, `p_{m+1} = e_1`.
pub fn cell_probabilities(
    g: &DistortionFunction,
    part: &Partition,
    mode: Mode,
) -> Result<CellProbabilities> {
    let e = stratum_means(g, part, mode)?;
    Ok(CellProbabilities::exact(
        cells_from_means(&e),
        Provenance::GenericIntegral,
    ))
}

/// `P(X >= k) = e_{m+2-k}`, differenced.
pub fn cells_from_means(e: &[f64]) -> Vec<f64> {
    let s = e.len(); // m + 1
    let exceed = |k: usize| -> f64 {
        if k == 0 {
            1.0
        } else if k > s {
            0.0
        } else {
            e[s - k]
        }
    };
    (0..=s).map(|k| exceed(k) - exceed(k + 1)).collect()
}

/// Monte Carlo check of the null law: uniform losses against their own
/// quantile function, with `G_{t,j}` drawn by rejection from the unstratified
/// mixture sampler. Independent of the stratified inverse used elsewhere.
pub fn mc_oracle_cell_probs(
    g: &DistortionFunction,
    part: &Partition,
    mode: Mode,
    n: usize,
    seed: u64,
) -> Result<CellProbabilities> {
    if n < 10_000 {
        return Err(Error::InvalidConfiguration(format!(
            "oracle needs at least 10000 trials, got {n}"
        )));
    }
    let mode = mode.resolve(g);
    let violations = validate_partition(g, part, mode);
    if !violations.is_empty() {
        return Err(Error::PartitionInvalid(violations));
    }
    let mixture = GMixture::new(&crate::distortion::decompose(g));
    let closure = mode.closure();
    let levels = part.levels();
    let strata = part.m() + 1;
    let locate = |u: f64| -> usize {
        // stratum index containing u under the closure
        match closure {
            Closure::LeftClosed => levels.partition_point(|&x| x <= u) - 1,
            Closure::RightClosed => levels.partition_point(|&x| x < u).max(1) - 1,
        }
    };
    let fam = StreamFamily::new(seed, Purpose::Oracle);
    let mut counts = alloc::vec![0u64; strata + 1];
    let mut filled = alloc::vec![f64::NAN; strata];
    for t in 0..n as u64 {
        let mut rng = fam.stream(t, 0);
        let loss = rng.uniform();
        filled.iter_mut().for_each(|v| *v = f64::NAN);
        let mut missing = strata;
        let mut guard = 0u64;
        while missing > 0 {
            let (u, _) = mixture.sample(&mut rng);
            let j = locate(u).min(strata - 1);
            if filled[j].is_nan() {
                filled[j] = u;
                missing -= 1;
            }
            guard += 1;
            if guard > 100_000_000 {
                return Err(Error::SamplerStuck(guard));
            }
        }
        // exception iff loss > q(1 - G) = 1 - G
        let x = filled.iter().filter(|&&u| loss > 1.0 - u).count();
        counts[x] += 1;
    }
    let nf = n as f64;
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
    let se = p.iter().map(|&v| libm::sqrt(v * (1.0 - v) / nf)).collect();
    Ok(CellProbabilities {
        p,
        provenance: Provenance::MonteCarlo,
        ill_conditioned: false,
        se: Some(se),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn avar_m1_cells() {
        let g = DistortionFunction::avar(0.025).unwrap();
        let part = Partition::tail_equidistant(0.025, 1).unwrap();
        let c = cell_probabilities(&g, &part, Mode::Auto).unwrap();
        let expected = [0.98125, 0.0125, 0.00625];
        for (a, b) in c.p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{:?}", c.p);
        }
        assert!(!c.ill_conditioned);
    }

    #[test]
    fn var_single_stratum() {
        let g = DistortionFunction::var(0.05).unwrap();
        let part = Partition::new(alloc::vec![0.0, 1.0]).unwrap();
        let c = cell_probabilities(&g, &part, Mode::Left).unwrap();
        assert!((c.p[0] - 0.95).abs() < 1e-15 && (c.p[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn validation_cases() {
        let avar = DistortionFunction::avar(0.025).unwrap();
        let part = Partition::tail_equidistant(0.025, 4).unwrap();
        assert!(validate_partition(&avar, &part, Mode::Left).is_empty());

        let g = DistortionFunction::mixed_jump(0.2, 0.4, 2.0 / 3.0, 0.01, 0.1).unwrap();
        let bad = Partition::from_inner(&[0.05, 0.1]).unwrap();
        let v = validate_partition(&g, &bad, Mode::General);
        assert_eq!(
            v,
            alloc::vec![Violation {
                index: 2,
                kind: ViolationKind::Discontinuous
            }]
        );

        let glue = DistortionFunction::gluevar(0.4, 2.0 / 3.0, 0.01, 0.05).unwrap();
        let flat = Partition::from_inner(&[0.05, 0.2, 0.5]).unwrap();
        let v = validate_partition(&glue, &flat, Mode::Left);
        assert!(v.contains(&Violation {
            index: 3,
            kind: ViolationKind::ZeroMass
        }));
        assert!(matches!(
            cell_probabilities(&glue, &flat, Mode::Left),
            Err(Error::PartitionInvalid(_))
        ));
    }

    #[test]
    fn partition_constructors() {
        let p = Partition::range_equidistant(0.005, 0.025, 3).unwrap();
        assert_eq!(p.m(), 3);
        assert!((p.levels()[1] - 0.01).abs() < 1e-15);
        let p = Partition::tail_equidistant_inclusive(0.05, 4).unwrap();
        assert_eq!(p.levels()[4], 0.05);
        assert!(Partition::new(alloc::vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Partition::new(alloc::vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn closure_indifference_for_continuous_levels() {
        let g = DistortionFunction::mixed_jump(0.2, 0.4, 2.0 / 3.0, 0.01, 0.1).unwrap();
        let part = Partition::tail_equidistant(0.1, 4).unwrap();
        let left = cell_probabilities(&g, &part, Mode::General).unwrap();
        let law = GLaw::new(&g);
        let e: Vec<f64> = part
            .strata()
            .map(|(a, b)| {
                law.partial_mean(a, b, Closure::RightClosed) / law.mass(a, b, Closure::RightClosed)
            })
            .collect();
        let right = cells_from_means(&e);
        for (a, b) in left.p.iter().zip(&right) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
