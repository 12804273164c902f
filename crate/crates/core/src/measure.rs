//! Named risk measures with textual specs such as `avar:0.025`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::distortion::DistortionFunction;
use crate::error::{invalid, Error, Result};
use crate::partition::{Mode, Partition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskMeasure {
    Var {
        alpha: f64,
    },
    Avar {
        alpha: f64,
    },
    GlueVar {
        h1: f64,
        h2: f64,
        beta: f64,
        alpha: f64,
    },
    Rvar {
        beta: f64,
        alpha: f64,
    },
    /// GlueVaR variant with a left jump at `beta` and a right jump at `alpha`
    MixedJump {
        h1: f64,
        h2: f64,
        h3: f64,
        beta: f64,
        alpha: f64,
    },
}

/// How the levels `α_1 … α_m` are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionRule {
    /// `jα/(m+1)`, or `β + (α-β)j/(m+1)` for RVaR
    #[default]
    Equidistant,
    /// `jα/m`, putting the last level on `α`
    Inclusive,
}

impl core::str::FromStr for PartitionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equidistant" => Ok(Self::Equidistant),
            "inclusive" => Ok(Self::Inclusive),
            other => Err(invalid(format!("unknown partition rule '{other}'"))),
        }
    }
}

impl RiskMeasure {
    pub const BASEL_AVAR: RiskMeasure = RiskMeasure::Avar { alpha: 0.025 };
    pub const STUDY_GLUEVAR: RiskMeasure = RiskMeasure::GlueVar {
        h1: 0.4,
        h2: 2.0 / 3.0,
        beta: 0.01,
        alpha: 0.05,
    };
    pub const STUDY_MIXED: RiskMeasure = RiskMeasure::MixedJump {
        h1: 0.2,
        h2: 0.4,
        h3: 2.0 / 3.0,
        beta: 0.01,
        alpha: 0.1,
    };

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Var { .. } => "var",
            Self::Avar { .. } => "avar",
            Self::GlueVar { .. } => "gluevar",
            Self::Rvar { .. } => "rvar",
            Self::MixedJump { .. } => "mixed",
        }
    }

    pub fn distortion(&self) -> Result<DistortionFunction> {
        match *self {
            Self::Var { alpha } => DistortionFunction::var(alpha),
            Self::Avar { alpha } => DistortionFunction::avar(alpha),
            Self::GlueVar {
                h1,
                h2,
                beta,
                alpha,
            } => DistortionFunction::gluevar(h1, h2, beta, alpha),
            Self::Rvar { beta, alpha } => DistortionFunction::rvar(beta, alpha),
            Self::MixedJump {
                h1,
                h2,
                h3,
                beta,
                alpha,
            } => DistortionFunction::mixed_jump(h1, h2, h3, beta, alpha),
        }
    }

    /// Outermost tail level.
    pub fn alpha(&self) -> f64 {
        match *self {
            Self::Var { alpha }
            | Self::Avar { alpha }
            | Self::GlueVar { alpha, .. }
            | Self::Rvar { alpha, .. }
            | Self::MixedJump { alpha, .. } => alpha,
        }
    }

    pub fn partition(&self, m: usize, rule: PartitionRule) -> Result<Partition> {
        match (*self, rule) {
            (Self::Rvar { beta, alpha }, _) => Partition::range_equidistant(beta, alpha, m),
            (_, PartitionRule::Equidistant) => Partition::tail_equidistant(self.alpha(), m),
            (_, PartitionRule::Inclusive) => {
                if m == 0 {
                    return Err(invalid("the inclusive rule needs m >= 1"));
                }
                Partition::tail_equidistant_inclusive(self.alpha(), m)
            }
        }
    }

    /// Method variant used when none is requested.
    pub fn default_mode(&self) -> Result<Mode> {
        Ok(Mode::Auto.resolve(&self.distortion()?))
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad number '{s}'")))?;
        let d: f64 = den
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad number '{s}'")))?;
        return Ok(n / d);
    }
    s.parse().map_err(|_| invalid(format!("bad number '{s}'")))
}

impl core::str::FromStr for RiskMeasure {
    type Err = Error;

    /// `kind[:param...]`; parameters accept fractions like `2/3`. A bare kind
    /// selects the study defaults.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or("").to_ascii_lowercase();
        let params: Vec<f64> = parts.map(parse_number).collect::<Result<_>>()?;
        let arity = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(invalid(format!(
                    "'{kind}' takes {n} parameters, got {}",
                    params.len()
                )))
            }
        };
        let measure = match (kind.as_str(), params.len()) {
            ("avar" | "es", 0) => Self::BASEL_AVAR,
            ("gluevar", 0) => Self::STUDY_GLUEVAR,
            ("mixed", 0) => Self::STUDY_MIXED,
            ("var", 0) => Self::Var { alpha: 0.05 },
            ("var", _) => {
                arity(1)?;
                Self::Var { alpha: params[0] }
            }
            ("avar" | "es", _) => {
                arity(1)?;
                Self::Avar { alpha: params[0] }
            }
            ("gluevar", _) => {
                arity(4)?;
                Self::GlueVar {
                    h1: params[0],
                    h2: params[1],
                    beta: params[2],
                    alpha: params[3],
                }
            }
            ("rvar", 1) => Self::Rvar {
                beta: params[0],
                alpha: 0.025,
            },
            ("rvar", _) => {
                arity(2)?;
                Self::Rvar {
                    beta: params[0],
                    alpha: params[1],
                }
            }
            ("mixed", _) => {
                arity(5)?;
                Self::MixedJump {
                    h1: params[0],
                    h2: params[1],
                    h3: params[2],
                    beta: params[3],
                    alpha: params[4],
                }
            }
            _ => return Err(invalid(format!("unknown risk measure '{s}'"))),
        };
        measure.distortion()?;
        Ok(measure)
    }
}

impl core::fmt::Display for RiskMeasure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let params: String = match *self {
            Self::Var { alpha } | Self::Avar { alpha } => format!("{alpha}"),
            Self::GlueVar {
                h1,
                h2,
                beta,
                alpha,
            } => format!("{h1}:{h2}:{beta}:{alpha}"),
            Self::Rvar { beta, alpha } => format!("{beta}:{alpha}"),
            Self::MixedJump {
                h1,
                h2,
                h3,
                beta,
                alpha,
            } => format!("{h1}:{h2}:{h3}:{beta}:{alpha}"),
        };
        write!(f, "{}:{params}", self.kind())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn parse_and_display_round_trip() {
        for s in [
            "avar:0.025",
            "var:0.05",
            "gluevar:0.4:2/3:0.01:0.05",
            "rvar:0.001:0.025",
            "mixed",
        ] {
            let m: RiskMeasure = s.parse().unwrap();
            let again: RiskMeasure = m.to_string().parse().unwrap();
            assert_eq!(m, again);
        }
        assert_eq!(
            "gluevar".parse::<RiskMeasure>().unwrap(),
            RiskMeasure::STUDY_GLUEVAR
        );
        assert!("avar:1.5".parse::<RiskMeasure>().is_err());
        assert!("gluevar:0.4".parse::<RiskMeasure>().is_err());
        assert!("wang:0.3".parse::<RiskMeasure>().is_err());
    }

    #[test]
    fn default_modes() {
        assert_eq!(RiskMeasure::BASEL_AVAR.default_mode().unwrap(), Mode::Left);
        assert_eq!(
            RiskMeasure::STUDY_GLUEVAR.default_mode().unwrap(),
            Mode::Left
        );
        assert_eq!(
            RiskMeasure::STUDY_MIXED.default_mode().unwrap(),
            Mode::General
        );
    }

    #[test]
    fn partitions() {
        let p = RiskMeasure::Rvar {
            beta: 0.001,
            alpha: 0.025,
        }
        .partition(4, PartitionRule::Equidistant)
        .unwrap();
        assert!((p.levels()[1] - (0.001 + 0.024 / 5.0)).abs() < 1e-15);
        let p = RiskMeasure::STUDY_GLUEVAR
            .partition(4, PartitionRule::Inclusive)
            .unwrap();
        assert_eq!(p.levels()[4], 0.05);
    }
}
