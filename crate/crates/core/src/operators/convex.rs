//! Scalar convex integrands g with closed-form resolvents.

use crate::error::{Error, Result};

/// Catalog of convex functions g: R -> R used in the multivalued term.
///
/// Every entry has 0 ∈ ∂g(0) and subgradients of at most linear growth,
/// so the growth exponent is p = 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexTerm {
    Zero,
    /// g(x) = |x|
    Abs,
    /// g(x) = x²/2
    HalfSquare,
    /// g(x) = max(0, x)²
    PositivePartSquare,
    /// g(x) = c|x|, c > 0
    ScaledAbs(f64),
}

fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

impl ConvexTerm {
    pub fn name(&self) -> String {
        match self {
            ConvexTerm::Zero => "zero".into(),
            ConvexTerm::Abs => "abs".into(),
            ConvexTerm::HalfSquare => "half_square".into(),
            ConvexTerm::PositivePartSquare => "positive_part_square".into(),
            ConvexTerm::ScaledAbs(c) => format!("scaled_abs({c})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ConvexTerm::ScaledAbs(c) = self {
            if !c.is_finite() {
                return Err(Error::config(format!("scaled_abs needs a finite scale, got {c}")));
            }
            if *c < 0.0 {
                return Err(Error::hypothesis(
                    "H(g)",
                    format!("scaled_abs({c}) is not convex"),
                ));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            ConvexTerm::Zero => 0.0,
            ConvexTerm::Abs => x.abs(),
            ConvexTerm::HalfSquare => 0.5 * x * x,
            ConvexTerm::PositivePartSquare => x.max(0.0).powi(2),
            ConvexTerm::ScaledAbs(c) => c * x.abs(),
        }
    }

    /// argmin_s (s - x)²/(2λ) + g(s)
    pub fn prox(&self, lambda: f64, x: f64) -> Result<f64> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Argument(format!(
                "prox step must be positive and finite, got {lambda}"
            )));
        }
        Ok(self.prox_unchecked(lambda, x))
    }

    pub(crate) fn prox_unchecked(&self, lambda: f64, x: f64) -> f64 {
        match *self {
            ConvexTerm::Zero => x,
            ConvexTerm::Abs => soft_threshold(x, lambda),
            ConvexTerm::HalfSquare => x / (1.0 + lambda),
            ConvexTerm::PositivePartSquare => {
                if x > 0.0 {
                    x / (1.0 + 2.0 * lambda)
                } else {
                    x
                }
            }
            ConvexTerm::ScaledAbs(c) => soft_threshold(x, c * lambda),
        }
    }

    /// An element of the Clarke derivative of x ↦ prox(λ, x), in [0, 1].
    pub fn prox_slope(&self, lambda: f64, x: f64) -> f64 {
        match *self {
            ConvexTerm::Zero => 1.0,
            ConvexTerm::Abs => {
                if x.abs() > lambda {
                    1.0
                } else {
                    0.0
                }
            }
            ConvexTerm::HalfSquare => 1.0 / (1.0 + lambda),
            ConvexTerm::PositivePartSquare => {
                if x > 0.0 {
                    1.0 / (1.0 + 2.0 * lambda)
                } else {
                    1.0
                }
            }
            ConvexTerm::ScaledAbs(c) => {
                if x.abs() > c * lambda {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Yosida approximation (x - prox(λ, x))/λ ∈ ∂g(prox(λ, x)).
    pub fn yosida(&self, lambda: f64, x: f64) -> Result<f64> {
        Ok((x - self.prox(lambda, x)?) / lambda)
    }

    /// ∂g(x) = [g'₋(x), g'₊(x)].
    pub fn subdifferential_interval(&self, x: f64) -> (f64, f64) {
        let sign_interval = |c: f64| {
            if x > 0.0 {
                (c, c)
            } else if x < 0.0 {
                (-c, -c)
            } else {
                (-c, c)
            }
        };
        match *self {
            ConvexTerm::Zero => (0.0, 0.0),
            ConvexTerm::Abs => sign_interval(1.0),
            ConvexTerm::HalfSquare => (x, x),
            ConvexTerm::PositivePartSquare => {
                let d = 2.0 * x.max(0.0);
                (d, d)
            }
            ConvexTerm::ScaledAbs(c) => sign_interval(c),
        }
    }

    /// Distance from `w` to ∂g(x).
    pub fn distance_to_subdifferential(&self, x: f64, w: f64) -> f64 {
        let (lo, hi) = self.subdifferential_interval(x);
        if w < lo {
            lo - w
        } else if w > hi {
            w - hi
        } else {
            0.0
        }
    }

    /// ĉ with |∂g(x)| ≤ ĉ (1 + |x|^{p-1}).
    pub fn growth_constant(&self) -> f64 {
        match *self {
            ConvexTerm::Zero | ConvexTerm::Abs | ConvexTerm::HalfSquare => 1.0,
            ConvexTerm::PositivePartSquare => 2.0,
            ConvexTerm::ScaledAbs(c) => c,
        }
    }

    pub fn exponent(&self) -> f64 {
        2.0
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ConvexTerm::Zero)
    }

    /// Entries exercised by the property suites.
    pub fn catalog() -> Vec<ConvexTerm> {
        vec![
            ConvexTerm::Zero,
            ConvexTerm::Abs,
            ConvexTerm::HalfSquare,
            ConvexTerm::PositivePartSquare,
            ConvexTerm::ScaledAbs(2.5),
        ]
    }
}
