//! The law of the randomized level `G`, whose distribution function is `g`.
//!
//! `P(G < u) = g(u-)` and `P(G <= u) = g(u+)`: every knot where `g` jumps is
//! an atom of `G`. The part of an atom coming from `g(u) - g(u-)` belongs to
//! the right-continuous component and the part from `g(u+) - g(u)` to the
//! left-continuous one. Laying these pieces out in order on the `v` axis gives
//! a generalized inverse that also reports which component it landed in, so a
//! single uniform yields both `G` and its label `C`.

use alloc::vec::Vec;

use crate::distortion::DistortionFunction;
use crate::error::{Error, Result};
use crate::partition::Closure;
use crate::rng::RngStream;

/// Mixture component a draw of `G` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentLabel {
    /// left-continuous step part: threshold uses the lower quantile
    L,
    /// right-continuous step part: threshold uses the upper quantile
    R,
    /// continuous part: lower quantile
    C,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PieceKind {
    Atom { u: f64, label: ComponentLabel },
    Ramp { u0: f64, u1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    v_lo: f64,
    v_hi: f64,
    kind: PieceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GLaw {
    g: DistortionFunction,
    pieces: Vec<Piece>,
}

impl GLaw {
    pub fn new(g: &DistortionFunction) -> Self {
        let knots = g.knots();
        let mut pieces = Vec::with_capacity(3 * knots.len());
        for (i, k) in knots.iter().enumerate() {
            if k.right_jump() > 0.0 {
                pieces.push(Piece {
                    v_lo: k.left,
                    v_hi: k.value,
                    kind: PieceKind::Atom {
                        u: k.u,
                        label: ComponentLabel::R,
                    },
                });
            }
            if k.left_jump() > 0.0 {
                pieces.push(Piece {
                    v_lo: k.value,
                    v_hi: k.right,
                    kind: PieceKind::Atom {
                        u: k.u,
                        label: ComponentLabel::L,
                    },
                });
            }
            if let Some(next) = knots.get(i + 1) {
                if next.left > k.right {
                    pieces.push(Piece {
                        v_lo: k.right,
                        v_hi: next.left,
                        kind: PieceKind::Ramp {
                            u0: k.u,
                            u1: next.u,
                        },
                    });
                }
            }
        }
        Self {
            g: g.clone(),
            pieces,
        }
    }

    pub fn distortion(&self) -> &DistortionFunction {
        &self.g
    }

    /// `v`-range of a stratum: `[g(a-), g(b-))` or `(g(a+), g(b+)]`.
    pub fn stratum_bounds(&self, a: f64, b: f64, closure: Closure) -> (f64, f64) {
        match closure {
            Closure::LeftClosed => (self.g.left_limit(a), self.g.left_limit(b)),
            Closure::RightClosed => (self.g.right_limit(a), self.g.right_limit(b)),
        }
    }

    /// `P(G ∈ stratum)`.
    pub fn mass(&self, a: f64, b: f64, closure: Closure) -> f64 {
        let (lo, hi) = self.stratum_bounds(a, b, closure);
        (hi - lo).max(0.0)
    }

    /// Generalized inverse. With `LeftClosed`, a `v` on a piece boundary maps
    /// to the upper piece; with `RightClosed`, to the lower one.
    pub fn invert(&self, v: f64, closure: Closure) -> (f64, ComponentLabel) {
        let idx = match closure {
            Closure::LeftClosed => self.pieces.partition_point(|p| p.v_hi <= v),
            Closure::RightClosed => self.pieces.partition_point(|p| p.v_hi < v),
        };
        let piece = match self.pieces.get(idx) {
            Some(p) => p,
            None => return (1.0, ComponentLabel::C),
        };
        match piece.kind {
            PieceKind::Atom { u, label } => (u, label),
            PieceKind::Ramp { u0, u1 } => {
                let w = ((v - piece.v_lo) / (piece.v_hi - piece.v_lo)).clamp(0.0, 1.0);
                (u0 + w * (u1 - u0), ComponentLabel::C)
            }
        }
    }

    /// Maps a uniform `w ∈ [0, 1)` to a draw of `G` conditional on the
    /// stratum, clamped into the stratum against rounding.
    pub fn conditional_from_uniform(
        &self,
        a: f64,
        b: f64,
        closure: Closure,
        w: f64,
    ) -> Result<(f64, ComponentLabel)> {
        let (lo, hi) = self.stratum_bounds(a, b, closure);
        if hi <= lo {
            return Err(Error::EmptyStratum { lo: a, hi: b });
        }
        Ok(self.conditional_in(a, b, lo, hi, closure, w))
    }

    /// As [`Self::conditional_from_uniform`] with precomputed `v`-bounds.
    #[inline]
    pub fn conditional_in(
        &self,
        a: f64,
        b: f64,
        lo: f64,
        hi: f64,
        closure: Closure,
        w: f64,
    ) -> (f64, ComponentLabel) {
        match closure {
            Closure::LeftClosed => {
                let v = (lo + (hi - lo) * w).min(hi.next_down());
                let (u, label) = self.invert(v.max(lo), closure);
                (u.clamp(a, b.next_down()), label)
            }
            Closure::RightClosed => {
                let v = (hi - (hi - lo) * w).max(lo.next_up());
                let (u, label) = self.invert(v.min(hi), closure);
                (u.clamp(a.next_up(), b), label)
            }
        }
    }

    pub fn sample_conditional(
        &self,
        a: f64,
        b: f64,
        closure: Closure,
        rng: &mut RngStream,
    ) -> Result<(f64, ComponentLabel)> {
        let w = rng.uniform();
        self.conditional_from_uniform(a, b, closure, w)
    }

    /// Unconditional draw of `(G, C)`.
    pub fn sample(&self, rng: &mut RngStream) -> (f64, ComponentLabel) {
        self.invert(rng.uniform(), Closure::LeftClosed)
    }

    /// `E[G 1{G ∈ stratum}]`, exact.
    pub fn partial_mean(&self, a: f64, b: f64, closure: Closure) -> f64 {
        let inside = |u: f64| match closure {
            Closure::LeftClosed => a <= u && u < b,
            Closure::RightClosed => a < u && u <= b,
        };
        let mut total = 0.0;
        for p in &self.pieces {
            match p.kind {
                PieceKind::Atom { u, .. } => {
                    if inside(u) {
                        total += u * (p.v_hi - p.v_lo);
                    }
                }
                PieceKind::Ramp { u0, u1 } => {
                    let x0 = u0.max(a);
                    let x1 = u1.min(b);
                    if x1 > x0 {
                        let slope = (p.v_hi - p.v_lo) / (u1 - u0);
                        total += 0.5 * slope * (x1 - x0) * (x1 + x0);
                    }
                }
            }
        }
        total
    }

    /// `E[G]`.
    pub fn mean(&self) -> f64 {
        1.0 - self.g.integral()
    }

    /// Atoms and ramps in increasing order of location.
    pub fn pieces(&self) -> impl Iterator<Item = LawPiece> + '_ {
        self.pieces.iter().map(|p| match p.kind {
            PieceKind::Atom { u, label } => LawPiece::Atom {
                u,
                mass: p.v_hi - p.v_lo,
                label,
            },
            PieceKind::Ramp { u0, u1 } => LawPiece::Ramp {
                u0,
                u1,
                slope: (p.v_hi - p.v_lo) / (u1 - u0),
            },
        })
    }
}

/// Public view of one piece of the law of `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawPiece {
    Atom {
        u: f64,
        mass: f64,
        label: ComponentLabel,
    },
    /// uniform density `slope` on `[u0, u1]`
    Ramp { u0: f64, u1: f64, slope: f64 },
}
