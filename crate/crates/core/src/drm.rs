//! Evaluation of `ρ_g(X) = ∫ q_X(1-u) dg(u)`, with the upper quantile on
//! right-continuous jumps.

use alloc::format;

use crate::distortion::DistortionFunction;
use crate::error::{Error, Result};
use crate::glaw::{ComponentLabel, GLaw, LawPiece};
use crate::quantile::QuantileFunction;

pub fn evaluate_drm<Q: QuantileFunction + ?Sized>(g: &DistortionFunction, q: &Q) -> Result<f64> {
    evaluate_law(&GLaw::new(g), q)
}

pub fn evaluate_law<Q: QuantileFunction + ?Sized>(law: &GLaw, q: &Q) -> Result<f64> {
    let mut total = 0.0;
    for piece in law.pieces() {
        total += match piece {
            LawPiece::Atom { u, mass, label } => {
                let x = match label {
                    ComponentLabel::R => q.upper_quantile(1.0 - u)?,
                    _ => q.quantile(1.0 - u)?,
                };
                mass * x
            }
            LawPiece::Ramp { u0, u1, slope } => slope * q.quantile_integral(1.0 - u1, 1.0 - u0)?,
        };
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::DivergedIntegral(format!(
            "risk measure evaluates to {total}"
        )))
    }
}
