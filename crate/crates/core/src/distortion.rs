//! Piecewise-linear distortion functions with jumps, and their unique split
//! into right-continuous step, left-continuous step and continuous parts.
//!
//! A distortion function is stored as a sorted list of knots. Each knot keeps
//! the left limit `g(u-)`, the value `g(u)` and the right limit `g(u+)`, and
//! between two knots `g` is affine from `g(u_i+)` to `g(u_{i+1}-)`. Keeping all
//! three numbers is what lets a function be neither left- nor right-continuous
//! at a point.
//!
//! Only this family is constructible. Smooth distortions (Wang transform,
//! proportional hazard, ...) would need a different representation and are
//! not provided.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Values that differ by at most this much are treated as equal (no jump).
pub const JUMP_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub u: f64,
    pub left: f64,
    pub value: f64,
    pub right: f64,
}

impl Knot {
    pub const fn new(u: f64, left: f64, value: f64, right: f64) -> Self {
        Self {
            u,
            left,
            value,
            right,
        }
    }

    /// A knot where `g` is continuous.
    pub const fn flat(u: f64, value: f64) -> Self {
        Self::new(u, value, value, value)
    }

    /// `g(u) - g(u-)`, the mass of a right-continuous jump.
    pub fn right_jump(&self) -> f64 {
        clean(self.value - self.left)
    }

    /// `g(u+) - g(u)`, the mass of a left-continuous jump.
    pub fn left_jump(&self) -> f64 {
        clean(self.right - self.value)
    }
}

fn clean(jump: f64) -> f64 {
    if jump <= JUMP_TOLERANCE {
        0.0
    } else {
        jump
    }
}

/// A nondecreasing `g: [0,1] -> [0,1]` with `g(0) = 0`, `g(1) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionFunction {
    knots: Vec<Knot>,
}

impl DistortionFunction {
    pub fn new(mut knots: Vec<Knot>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidDistortion(msg.into()));
        if knots.len() < 2 {
            return bad("at least the knots 0 and 1 are required");
        }
        if knots.iter().any(|k| {
            !(k.u.is_finite() && k.left.is_finite() && k.value.is_finite() && k.right.is_finite())
        }) {
            return bad("non-finite knot data");
        }
        if knots[0].u != 0.0 || knots[knots.len() - 1].u != 1.0 {
            return bad("first knot must be 0 and last knot must be 1");
        }
        if knots.windows(2).any(|w| w[0].u >= w[1].u) {
            return bad("knot locations must be strictly increasing");
        }
        for k in &knots {
            for v in [k.left, k.value, k.right] {
                if !(-JUMP_TOLERANCE..=1.0 + JUMP_TOLERANCE).contains(&v) {
                    return Err(Error::InvalidDistortion(format!(
                        "value {v} at u = {} outside [0, 1]",
                        k.u
                    )));
                }
            }
            if k.left > k.value + JUMP_TOLERANCE || k.value > k.right + JUMP_TOLERANCE {
                return Err(Error::InvalidDistortion(format!(
                    "not monotone at knot u = {}",
                    k.u
                )));
            }
        }
        if knots
            .windows(2)
            .any(|w| w[0].right > w[1].left + JUMP_TOLERANCE)
        {
            return bad("negative slope between knots");
        }
        let first = &knots[0];
        if first.left.abs() > JUMP_TOLERANCE || first.value.abs() > JUMP_TOLERANCE {
            return bad("g(0) must be 0");
        }
        let last = &knots[knots.len() - 1];
        if (last.value - 1.0).abs() > JUMP_TOLERANCE || (last.right - 1.0).abs() > JUMP_TOLERANCE {
            return bad("g(1) must be 1");
        }
        // Snap tolerated float noise onto the exact constraints.
        let n = knots.len();
        knots[0].left = 0.0;
        knots[0].value = 0.0;
        knots[n - 1].value = 1.0;
        knots[n - 1].right = 1.0;
        let mut floor = 0.0_f64;
        for k in &mut knots {
            k.left = k.left.clamp(floor, 1.0);
            k.value = k.value.clamp(k.left, 1.0);
            k.right = k.right.clamp(k.value, 1.0);
            floor = k.right;
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    /// `g(u) = u`.
    pub fn identity() -> Self {
        Self {
            knots: alloc::vec![Knot::flat(0.0, 0.0), Knot::flat(1.0, 1.0)],
        }
    }

    /// Value at risk: `g(u) = 1{alpha < u <= 1}`.
    pub fn var(alpha: f64) -> Result<Self> {
        check_open_unit(alpha, "alpha")?;
        Self::new(alloc::vec![
            Knot::flat(0.0, 0.0),
            Knot::new(alpha, 0.0, 0.0, 1.0),
            Knot::flat(1.0, 1.0),
        ])
    }

    /// Average value at risk: `g(u) = min(u / alpha, 1)`.
    pub fn avar(alpha: f64) -> Result<Self> {
        check_open_unit(alpha, "alpha")?;
        Self::new(alloc::vec![
            Knot::flat(0.0, 0.0),
            Knot::flat(alpha, 1.0),
            Knot::flat(1.0, 1.0),
        ])
    }

    /// GlueVaR: `h1 u / beta` on `[0, beta]`, linear from `h1` to `h2` on
    /// `(beta, alpha]`, and 1 on `(alpha, 1]`.
    pub fn gluevar(h1: f64, h2: f64, beta: f64, alpha: f64) -> Result<Self> {
        if !(0.0 <= beta && beta < alpha && alpha <= 1.0) {
            return Err(invalid(format!(
                "GlueVaR needs 0 <= beta < alpha <= 1, got beta = {beta}, alpha = {alpha}"
            )));
        }
        if !(0.0 <= h1 && h1 <= h2 && h2 <= 1.0) {
            return Err(invalid(format!(
                "GlueVaR needs 0 <= h1 <= h2 <= 1, got h1 = {h1}, h2 = {h2}"
            )));
        }
        if alpha == 1.0 && h2 != 1.0 {
            return Err(invalid("GlueVaR with alpha = 1 requires h2 = 1"));
        }
        let mut knots = Vec::with_capacity(4);
        if beta > 0.0 {
            knots.push(Knot::flat(0.0, 0.0));
            knots.push(Knot::flat(beta, h1));
        } else {
            knots.push(Knot::new(0.0, 0.0, 0.0, h1));
        }
        if alpha < 1.0 {
            knots.push(Knot::new(alpha, h2, h2, 1.0));
        }
        knots.push(Knot::flat(1.0, 1.0));
        Self::new(knots)
    }

    /// Range value at risk: ramp from 0 at `beta` to 1 at `alpha`.
    pub fn rvar(beta: f64, alpha: f64) -> Result<Self> {
        if !(0.0 < beta && beta < alpha && alpha < 1.0) {
            return Err(invalid(format!(
                "RVaR needs 0 < beta < alpha < 1, got beta = {beta}, alpha = {alpha}"
            )));
        }
        Self::new(alloc::vec![
            Knot::flat(0.0, 0.0),
            Knot::flat(beta, 0.0),
            Knot::flat(alpha, 1.0),
            Knot::flat(1.0, 1.0),
        ])
    }

    /// The modified GlueVaR shape that jumps from `h1` to `h2` just after
    /// `beta` and from `h3` to 1 at `alpha`, so it is neither left- nor
    /// right-continuous.
    pub fn mixed_jump(h1: f64, h2: f64, h3: f64, beta: f64, alpha: f64) -> Result<Self> {
        if !(0.0 <= h1 && h1 < h2 && h2 < h3 && h3 < 1.0) {
            return Err(invalid(format!(
                "need 0 <= h1 < h2 < h3 < 1, got ({h1}, {h2}, {h3})"
            )));
        }
        if h3 - h2 + h1 > 1.0 {
            return Err(invalid("need h3 - h2 + h1 <= 1"));
        }
        if !(0.0 <= beta && beta < alpha && alpha <= 1.0) {
            return Err(invalid(format!(
                "need 0 <= beta < alpha <= 1, got beta = {beta}, alpha = {alpha}"
            )));
        }
        let mut knots = Vec::with_capacity(4);
        if beta > 0.0 {
            knots.push(Knot::flat(0.0, 0.0));
            knots.push(Knot::new(beta, h1, h1, h2));
        } else {
            knots.push(Knot::new(0.0, 0.0, 0.0, h2));
        }
        if alpha < 1.0 {
            knots.push(Knot::new(alpha, h3, 1.0, 1.0));
            knots.push(Knot::flat(1.0, 1.0));
        } else {
            knots.push(Knot::new(1.0, h3, 1.0, 1.0));
        }
        Self::new(knots)
    }

    fn locate(&self, u: f64) -> core::result::Result<usize, usize> {
        let i = self.knots.partition_point(|k| k.u < u);
        if i < self.knots.len() && self.knots[i].u == u {
            Ok(i)
        } else {
            Err(i)
        }
    }

    fn interpolate(&self, i: usize, u: f64) -> f64 {
        // u strictly between knots i-1 and i
        let a = &self.knots[i - 1];
        let b = &self.knots[i];
        a.right + (b.left - a.right) * (u - a.u) / (b.u - a.u)
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        match self.locate(u) {
            Ok(i) => self.knots[i].value,
            Err(i) => self.interpolate(i, u),
        }
    }

    /// `g(u-)`, with the convention `g(0-) = g(0)`.
    pub fn left_limit(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u > 1.0 {
            return 1.0;
        }
        match self.locate(u) {
            Ok(i) => self.knots[i].left,
            Err(i) => self.interpolate(i, u),
        }
    }

    /// `g(u+)`, with the convention `g(1+) = g(1)`.
    pub fn right_limit(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        match self.locate(u) {
            Ok(i) => self.knots[i].right,
            Err(i) => self.interpolate(i, u),
        }
    }

    pub fn is_continuous_at(&self, u: f64) -> bool {
        match self.locate(u) {
            Ok(i) => {
                let k = &self.knots[i];
                k.right_jump() == 0.0 && k.left_jump() == 0.0
            }
            Err(_) => true,
        }
    }

    pub fn is_left_continuous(&self) -> bool {
        self.knots.iter().all(|k| k.right_jump() == 0.0)
    }

    pub fn is_right_continuous(&self) -> bool {
        self.knots.iter().all(|k| k.left_jump() == 0.0)
    }

    pub fn is_continuous(&self) -> bool {
        self.is_left_continuous() && self.is_right_continuous()
    }

    /// `∫_0^1 g(u) du`; the mean of the law with distribution function `g`
    /// is `1 - ∫ g`.
    pub fn integral(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| 0.5 * (w[0].right + w[1].left) * (w[1].u - w[0].u))
            .sum()
    }
}

fn check_open_unit(x: f64, name: &str) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// Which side a step function is continuous from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSide {
    /// `Σ mass 1{loc <= u}`
    Right,
    /// `Σ mass 1{loc < u}`
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// A step distortion function: a probability distribution made of atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPart {
    pub side: StepSide,
    pub atoms: Vec<Atom>,
}

impl StepPart {
    /// Stand-in used when a jump class is empty; never enters a reconstruction.
    fn placeholder(side: StepSide) -> Self {
        // 1{u >= 1} for the right-continuous part; 1{u > 0} for the left one,
        // since a left-continuous jump at 1 would not reach g(1) = 1.
        let location = match side {
            StepSide::Right => 1.0,
            StepSide::Left => 0.0,
        };
        Self {
            side,
            atoms: alloc::vec![Atom {
                location,
                mass: 1.0
            }],
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| match self.side {
                StepSide::Right => a.location <= u,
                StepSide::Left => a.location < u,
            })
            .map(|a| a.mass)
            .sum()
    }

    pub fn left_limit(&self, u: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.location < u)
            .map(|a| a.mass)
            .sum()
    }

    pub fn right_limit(&self, u: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.location <= u)
            .map(|a| a.mass)
            .sum()
    }
}

/// `g = c_r g_sr + c_l g_sl + c_c g_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub c_r: f64,
    pub c_l: f64,
    pub c_c: f64,
    pub right_step: StepPart,
    pub left_step: StepPart,
    pub continuous: DistortionFunction,
    grid: Vec<f64>,
}

impl Decomposition {
    pub fn eval(&self, u: f64) -> f64 {
        self.combine(|d| {
            (
                d.right_step.eval(u),
                d.left_step.eval(u),
                d.continuous.eval(u),
            )
        })
    }

    pub fn left_limit(&self, u: f64) -> f64 {
        self.combine(|d| {
            (
                d.right_step.left_limit(u),
                d.left_step.left_limit(u),
                d.continuous.left_limit(u),
            )
        })
    }

    pub fn right_limit(&self, u: f64) -> f64 {
        self.combine(|d| {
            (
                d.right_step.right_limit(u),
                d.left_step.right_limit(u),
                d.continuous.right_limit(u),
            )
        })
    }

    fn combine(&self, parts: impl Fn(&Self) -> (f64, f64, f64)) -> f64 {
        let (r, l, c) = parts(self);
        let mut total = 0.0;
        if self.c_r > 0.0 {
            total += self.c_r * r;
        }
        if self.c_l > 0.0 {
            total += self.c_l * l;
        }
        if self.c_c > 0.0 {
            total += self.c_c * c;
        }
        total
    }

    /// Knot locations shared by all parts.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Reassembles `g` from its parts.
    pub fn recombined(&self) -> Result<DistortionFunction> {
        self.weighted(1.0, 1.0, 1.0, 1.0)
    }

    fn weighted(&self, wr: f64, wl: f64, wc: f64, norm: f64) -> Result<DistortionFunction> {
        let knots = self
            .grid
            .iter()
            .map(|&u| {
                let mix = |r: f64, l: f64, c: f64| {
                    let mut total = 0.0;
                    if wr > 0.0 {
                        total += wr * r;
                    }
                    if wl > 0.0 {
                        total += wl * l;
                    }
                    if wc > 0.0 {
                        total += wc * c;
                    }
                    total / norm
                };
                Knot::new(
                    u,
                    mix(
                        self.right_step.left_limit(u),
                        self.left_step.left_limit(u),
                        self.continuous.left_limit(u),
                    ),
                    mix(
                        self.right_step.eval(u),
                        self.left_step.eval(u),
                        self.continuous.eval(u),
                    ),
                    mix(
                        self.right_step.right_limit(u),
                        self.left_step.right_limit(u),
                        self.continuous.right_limit(u),
                    ),
                )
            })
            .collect();
        DistortionFunction::new(knots)
    }

    /// Splits `g` into one left- and one right-continuous distortion,
    /// `g = d_l h_l + d_r h_r`, sharing the continuous part equally.
    pub fn two_part(&self) -> Result<TwoPartDecomposition> {
        let half = 0.5 * self.c_c;
        let d_l = self.c_l + half;
        let d_r = self.c_r + half;
        let h_l = if d_l > 0.0 {
            Some(self.weighted(0.0, self.c_l, half, d_l)?)
        } else {
            None
        };
        let h_r = if d_r > 0.0 {
            Some(self.weighted(self.c_r, 0.0, half, d_r)?)
        } else {
            None
        };
        Ok(TwoPartDecomposition { d_l, h_l, d_r, h_r })
    }
}

/// `g = d_l h_l + d_r h_r` with `h_l` left- and `h_r` right-continuous.
/// A part is `None` when its weight is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPartDecomposition {
    pub d_l: f64,
    pub h_l: Option<DistortionFunction>,
    pub d_r: f64,
    pub h_r: Option<DistortionFunction>,
}

impl TwoPartDecomposition {
    pub fn eval(&self, u: f64) -> f64 {
        let l = self.h_l.as_ref().map_or(0.0, |h| self.d_l * h.eval(u));
        let r = self.h_r.as_ref().map_or(0.0, |h| self.d_r * h.eval(u));
        l + r
    }
}

/// Collects jump masses into the two step parts and normalizes what remains
/// into the continuous part.
pub fn decompose(g: &DistortionFunction) -> Decomposition {
    let knots = g.knots();
    let grid: Vec<f64> = knots.iter().map(|k| k.u).collect();

    let right_atoms: Vec<Atom> = knots
        .iter()
        .filter(|k| k.right_jump() > 0.0)
        .map(|k| Atom {
            location: k.u,
            mass: k.right_jump(),
        })
        .collect();
    let left_atoms: Vec<Atom> = knots
        .iter()
        .filter(|k| k.left_jump() > 0.0)
        .map(|k| Atom {
            location: k.u,
            mass: k.left_jump(),
        })
        .collect();
    let c_r: f64 = right_atoms.iter().map(|a| a.mass).sum();
    let c_l: f64 = left_atoms.iter().map(|a| a.mass).sum();

    let increments: Vec<f64> = knots
        .windows(2)
        .map(|w| (w[1].left - w[0].right).max(0.0))
        .collect();
    let c_c: f64 = increments.iter().sum();

    let normalize = |atoms: Vec<Atom>, total: f64, side: StepSide| {
        if total > 0.0 {
            StepPart {
                side,
                atoms: atoms
                    .into_iter()
                    .map(|a| Atom {
                        location: a.location,
                        mass: a.mass / total,
                    })
                    .collect(),
            }
        } else {
            StepPart::placeholder(side)
        }
    };

    let continuous = if c_c > 0.0 {
        let mut acc = 0.0;
        let mut cont = Vec::with_capacity(knots.len());
        cont.push(Knot::flat(0.0, 0.0));
        for (i, inc) in increments.iter().enumerate() {
            acc += inc;
            let v = if i + 1 == increments.len() {
                1.0
            } else {
                (acc / c_c).min(1.0)
            };
            cont.push(Knot::flat(knots[i + 1].u, v));
        }
        DistortionFunction { knots: cont }
    } else {
        DistortionFunction::identity()
    };

    Decomposition {
        c_r,
        c_l,
        c_c,
        right_step: normalize(right_atoms, c_r, StepSide::Right),
        left_step: normalize(left_atoms, c_l, StepSide::Left),
        continuous,
        grid,
    }
}

/// Weights of GlueVaR as `w1 AVaR_beta + w2 AVaR_alpha + w3 VaR_alpha`.
pub fn gluevar_weights(h1: f64, h2: f64, beta: f64, alpha: f64) -> Result<(f64, f64, f64)> {
    if alpha == beta {
        return Err(invalid("GlueVaR weights need alpha != beta"));
    }
    if !(0.0 <= beta && beta < alpha && alpha <= 1.0 && 0.0 <= h1 && h1 <= h2 && h2 <= 1.0) {
        return Err(invalid("GlueVaR parameter ordering violated"));
    }
    let spread = alpha - beta;
    let w1 = h1 - (h2 - h1) * beta / spread;
    let w2 = (h2 - h1) * alpha / spread;
    let w3 = 1.0 - h2;
    Ok((w1, w2, w3))
}

/// Header line of the plain-text distortion record.
pub const RECORD_HEADER: &str = "distortion v1";

impl DistortionFunction {
    /// `distortion v1` followed by one `knot u g(u-) g(u) g(u+)` line per
    /// knot. Seventeen significant digits make the round trip bit-exact.
    pub fn to_record(&self) -> String {
        let mut out = String::from(RECORD_HEADER);
        out.push('\n');
        for k in &self.knots {
            out.push_str(&format!(
                "knot {:.16e} {:.16e} {:.16e} {:.16e}\n",
                k.u, k.left, k.value, k.right
            ));
        }
        out
    }

    /// Parses [`Self::to_record`] output. Blank lines and `#` comments are
    /// ignored.
    pub fn from_record(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        if lines.next() != Some(RECORD_HEADER) {
            return Err(Error::InvalidDistortion(format!(
                "record must start with '{RECORD_HEADER}'"
            )));
        }
        let mut knots = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 || fields[0] != "knot" {
                return Err(Error::InvalidDistortion(format!(
                    "bad record line '{line}'"
                )));
            }
            let mut v = [0.0; 4];
            for (slot, f) in v.iter_mut().zip(&fields[1..]) {
                *slot = f
                    .parse()
                    .map_err(|_| Error::InvalidDistortion(format!("bad number '{f}'")))?;
            }
            knots.push(Knot::new(v[0], v[1], v[2], v[3]));
        }
        Self::new(knots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn var_is_a_left_continuous_jump() {
        let g = DistortionFunction::var(0.05).unwrap();
        assert_eq!(g.eval(0.05), 0.0);
        assert_eq!(g.eval(0.051), 1.0);
        let d = decompose(&g);
        assert_eq!((d.c_r, d.c_l, d.c_c), (0.0, 1.0, 0.0));
        assert_eq!(
            d.left_step.atoms,
            alloc::vec![Atom {
                location: 0.05,
                mass: 1.0
            }]
        );
    }

    #[test]
    fn avar_is_continuous() {
        let g = DistortionFunction::avar(0.025).unwrap();
        assert!(close(g.eval(0.0125), 0.5, TOL));
        assert_eq!(g.eval(0.5), 1.0);
        let d = decompose(&g);
        assert_eq!((d.c_r, d.c_l), (0.0, 0.0));
        assert!(close(d.c_c, 1.0, TOL));
    }

    #[test]
    fn gluevar_values_and_decomposition() {
        let g = DistortionFunction::gluevar(0.4, 2.0 / 3.0, 0.01, 0.05).unwrap();
        assert!(close(g.eval(0.01), 0.4, TOL));
        assert!(close(g.eval(0.05), 2.0 / 3.0, TOL));
        assert_eq!(g.right_limit(0.05), 1.0);
        assert!(g.is_left_continuous());
        let d = decompose(&g);
        assert!(close(d.c_l, 1.0 / 3.0, TOL));
        assert!(close(d.c_c, 2.0 / 3.0, TOL));
        assert_eq!(d.c_r, 0.0);
        assert_eq!(d.left_step.atoms[0].location, 0.05);
    }

    #[test]
    fn gluevar_with_unit_heights_is_avar_at_beta() {
        let g = DistortionFunction::gluevar(1.0, 1.0, 0.02, 0.05).unwrap();
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            let expected = if u <= 0.02 { u / 0.02 } else { 1.0 };
            assert!(close(g.eval(u), expected, TOL), "u = {u}");
        }
    }

    #[test]
    fn rvar_ramp_and_limit() {
        let g = DistortionFunction::rvar(0.005, 0.025).unwrap();
        assert!(close(g.eval(0.015), 0.5, TOL));
        let d = decompose(&g);
        assert!(close(d.c_c, 1.0, TOL));

        let narrow = DistortionFunction::rvar(1e-12, 0.025).unwrap();
        let avar = DistortionFunction::avar(0.025).unwrap();
        for i in 0..=1000 {
            let u = i as f64 / 1000.0;
            assert!(close(narrow.eval(u), avar.eval(u), 1e-9));
        }
    }

    #[test]
    fn mixed_jump_decomposition() {
        let g = DistortionFunction::mixed_jump(0.2, 0.4, 2.0 / 3.0, 0.01, 0.1).unwrap();
        assert!(close(g.eval(0.01), 0.2, TOL));
        assert!(close(g.right_limit(0.01), 0.4, TOL));
        assert!(close(g.left_limit(0.1), 2.0 / 3.0, TOL));
        assert_eq!(g.eval(0.1), 1.0);
        assert!(!g.is_left_continuous() && !g.is_right_continuous());
        let d = decompose(&g);
        assert!(close(d.c_r, 1.0 / 3.0, TOL));
        assert!(close(d.c_l, 0.2, TOL));
        assert!(close(d.c_c, 7.0 / 15.0, TOL));
        assert!(close(d.c_r + d.c_l + d.c_c, 1.0, TOL));
    }

    #[test]
    fn parameter_errors() {
        assert!(DistortionFunction::var(0.0).is_err());
        assert!(DistortionFunction::avar(1.0).is_err());
        assert!(DistortionFunction::gluevar(0.7, 0.5, 0.01, 0.05).is_err());
        assert!(DistortionFunction::gluevar(0.4, 0.6, 0.05, 0.01).is_err());
        assert!(DistortionFunction::gluevar(0.4, 0.6, 0.01, 1.0).is_err());
        assert!(DistortionFunction::rvar(0.03, 0.025).is_err());
        assert!(DistortionFunction::mixed_jump(0.4, 0.2, 0.6, 0.01, 0.1).is_err());
        assert!(gluevar_weights(0.4, 0.6, 0.05, 0.05).is_err());
    }

    #[test]
    fn invalid_knots_rejected() {
        let dec = DistortionFunction::new(alloc::vec![
            Knot::flat(0.0, 0.0),
            Knot::flat(0.5, 0.8),
            Knot::new(0.7, 0.6, 0.6, 0.6),
            Knot::flat(1.0, 1.0),
        ]);
        assert!(dec.is_err());
        let no_end =
            DistortionFunction::new(alloc::vec![Knot::flat(0.0, 0.0), Knot::flat(0.9, 1.0)]);
        assert!(no_end.is_err());
    }

    #[test]
    fn two_part_weights() {
        let avar = decompose(&DistortionFunction::avar(0.025).unwrap());
        let tp = avar.two_part().unwrap();
        assert!(close(tp.d_l, 0.5, TOL) && close(tp.d_r, 0.5, TOL));
        let var = decompose(&DistortionFunction::var(0.05).unwrap());
        let tp = var.two_part().unwrap();
        assert_eq!(tp.d_l, 1.0);
        assert_eq!(tp.d_r, 0.0);
        assert!(tp.h_r.is_none());
        let g = DistortionFunction::mixed_jump(0.2, 0.4, 2.0 / 3.0, 0.01, 0.1).unwrap();
        let tp = decompose(&g).two_part().unwrap();
        assert!(close(tp.d_l, 13.0 / 30.0, TOL));
        assert!(close(tp.d_r, 17.0 / 30.0, TOL));
        assert!(tp.h_l.as_ref().unwrap().is_left_continuous());
        assert!(tp.h_r.as_ref().unwrap().is_right_continuous());
        for i in 0..=1000 {
            let u = i as f64 / 1000.0;
            assert!(close(tp.eval(u), g.eval(u), TOL));
        }
    }

    #[test]
    fn gluevar_weight_identities() {
        let (w1, w2, w3) = gluevar_weights(0.4, 2.0 / 3.0, 0.01, 0.05).unwrap();
        assert!(close(w1, 1.0 / 3.0, 1e-14));
        assert!(close(w2, 1.0 / 3.0, 1e-14));
        assert!(close(w3, 1.0 / 3.0, 1e-14));
        let (w1, w2, w3) = gluevar_weights(0.3, 0.3, 0.01, 0.05).unwrap();
        assert_eq!(w2, 0.0);
        assert_eq!(w1, 0.3);
        assert!(close(w3, 0.7, 1e-15));
    }

    #[test]
    fn record_round_trip_is_bit_exact() {
        let g = DistortionFunction::mixed_jump(0.2, 0.4, 2.0 / 3.0, 0.01, 0.1).unwrap();
        let text = g.to_record();
        assert!(text.starts_with("distortion v1\nknot "));
        assert_eq!(DistortionFunction::from_record(&text).unwrap(), g);
        let noisy = alloc::format!("# comment\n\n{text}\n");
        assert_eq!(DistortionFunction::from_record(&noisy).unwrap(), g);
        assert!(DistortionFunction::from_record("distortion v2\n").is_err());
        assert!(DistortionFunction::from_record("distortion v1\nknot 0 0 0\n").is_err());
    }
}
