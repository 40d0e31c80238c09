//! Revenue functionals of the second-price auction with a random reserve,
//! the affine certificate, and mechanism revenue under the worst case.
//!
//! A sale happens only when the highest value strictly exceeds the reserve,
//! so ties go against the seller.

use serde::Serialize;

use crate::distributions::{ReserveDist, ValueProfile, WorstCaseDist};
use crate::equilibrium::Equilibrium;
use crate::error::{domain, Error, Result};

/// `L(v) = Σ cᵢ·vᵢ + b` over the active bidders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineCertificate {
    pub coeffs: Vec<f64>,
    pub intercept: f64,
}

impl AffineCertificate {
    /// Evaluates `L` on an active-bidder profile (one value per coefficient).
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.coeffs.len());
        self.coeffs.iter().zip(values).map(|(c, v)| c * v).sum::<f64>() + self.intercept
    }
}

/// Interim allocations of a mechanism at the two payoff-relevant types of
/// each active bidder: the top value 1 and the floor `α`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterimAllocation {
    x_at_one: Vec<f64>,
    x_at_alpha: Vec<f64>,
}

impl InterimAllocation {
    pub fn new(x_at_one: Vec<f64>, x_at_alpha: Vec<f64>) -> Result<Self> {
        if x_at_one.len() != x_at_alpha.len() {
            return Err(Error::LengthMismatch {
                what: "x_at_alpha",
                expected: x_at_one.len(),
                actual: x_at_alpha.len(),
            });
        }
        for &x in x_at_one.iter().chain(&x_at_alpha) {
            if !(0.0..=1.0).contains(&x) {
                return Err(domain("InterimAllocation", x, "[0, 1]"));
            }
        }
        Ok(Self { x_at_one, x_at_alpha })
    }

    /// The second-price auction with reserve law `G*`: the top type always
    /// wins, the floor type never does.
    pub fn second_price(k: usize) -> Self {
        Self { x_at_one: vec![1.0; k], x_at_alpha: vec![0.0; k] }
    }

    pub fn x_at_one(&self) -> &[f64] {
        &self.x_at_one
    }

    pub fn x_at_alpha(&self) -> &[f64] {
        &self.x_at_alpha
    }

    /// Competitive mechanisms never allocate to the floor type.
    pub fn is_competitive(&self) -> bool {
        self.x_at_alpha.iter().all(|&x| x == 0.0)
    }
}

/// Expected revenue `φ(v; G*)` at a fixed profile, in closed form:
/// `v₂·G*(v₂) + ∫_{v₂}^{v₁} p·g(p) dp`.
pub fn phi(v: &ValueProfile, g: &ReserveDist) -> f64 {
    let (v1, v2) = (v.first(), v.second());
    let alpha = g.alpha();
    let c = 1.0 / g.normalizer();
    // The zero reserve sells whenever v₁ > 0 and collects v₂.
    let mut total = if v1 > 0.0 { g.atom_at_zero() * v2 } else { 0.0 };
    // Reserves in (α, v₂) never bind: revenue v₂.
    if v2 > alpha {
        total += c * v2 * (v2 / alpha).ln();
    }
    // Reserves in (max(α, v₂), v₁) bind: revenue p against density c/p.
    let lo = v2.max(alpha);
    if v1 > lo {
        total += c * (v1 - lo);
    }
    total
}

/// Seller revenue `η(p; F*)` from a deterministic reserve `p`.
pub fn eta(p: f64, d: &WorstCaseDist) -> f64 {
    let alpha = d.alpha();
    if p >= 1.0 {
        // H puts its atom exactly at 1 and the sale needs v₁ > p.
        0.0
    } else if p <= alpha {
        d.runner_up_value().max(p)
    } else {
        p * (1.0 - d.highest().cdf(p))
    }
}

/// `Ψ(F*, G*) = α`.
pub fn psi_closed_form(eq: &Equilibrium) -> f64 {
    eq.alpha()
}

/// Supporting affine function: every coefficient `1/(k−1−ln α)` and
/// intercept `−α/(k−1−ln α)`.
pub fn certificate(eq: &Equilibrium) -> AffineCertificate {
    let c = 1.0 / ReserveDist::for_equilibrium(eq).normalizer();
    AffineCertificate {
        coeffs: vec![c; eq.k()],
        intercept: -eq.alpha() * c,
    }
}

/// `J(v) = v − (H(1⁻) − H(v))/h(v)` evaluated in its quotient form; it
/// simplifies to `v²`.
pub fn virtual_value(v: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain("virtual_value", alpha, "alpha in (0, 1)"));
    }
    if !(v > alpha && v < 1.0) {
        return Err(domain("virtual_value", v, "(alpha, 1)"));
    }
    let h_left_one = 1.0 - alpha;
    let h_v = (v - alpha) / v;
    let density = alpha / (v * v);
    Ok(v - (h_left_one - h_v) / density)
}

/// Revenue of a mechanism against `F*`, which only depends on the interim
/// allocations at the top and floor types:
/// `Σᵢ θᵢ·α·Xᵢ(1) + (1 − θᵢ)·α·Xᵢ(α)`.
pub fn competitive_mechanism_revenue(eq: &Equilibrium, alloc: &InterimAllocation) -> Result<f64> {
    if alloc.x_at_one.len() != eq.k() {
        return Err(Error::LengthMismatch {
            what: "interim allocation",
            expected: eq.k(),
            actual: alloc.x_at_one.len(),
        });
    }
    let alpha = eq.alpha();
    Ok(eq
        .thetas()
        .iter()
        .zip(alloc.x_at_one.iter().zip(&alloc.x_at_alpha))
        .map(|(&t, (&x1, &xa))| t * alpha * x1 + (1.0 - t) * alpha * xa)
        .sum())
}

/// Revenue `α + α(1 − α)` of the non-competitive two-bidder mechanism that
/// favours the floor type unless the other bidder has value 1.
pub fn counterexample_revenue(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain("counterexample_revenue", alpha, "(0, 1)"));
    }
    Ok(alpha + alpha * (1.0 - alpha))
}
