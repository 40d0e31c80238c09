//! Closed-form equilibrium objects: the active-bidder cutoff `k`, the lower
//! bound `α` on the second-highest value, and nature's selection weights `θᵢ`.

mod lambert;

use serde::Serialize;

use crate::error::{domain, Error, Result};

pub use lambert::lambert_w_minus1;

/// Lower end of the bisection bracket for `α`.
const ALPHA_EPS: f64 = 1e-15;

/// Distance from `α` below which a mean is reported as a boundary tie.
const TIE_TOL: f64 = 1e-12;

/// One bidder: the position in the caller's input and the known mean value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bidder {
    pub index: usize,
    pub mean: f64,
}

/// Bidder means, stored sorted in descending order with original positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuctionInstance {
    bidders: Vec<Bidder>,
}

impl AuctionInstance {
    pub fn new(means: &[f64]) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::NoBidders);
        }
        let mut bidders = Vec::with_capacity(means.len());
        for (index, &mean) in means.iter().enumerate() {
            if !(mean > 0.0 && mean < 1.0) {
                return Err(Error::MeanOutOfRange { index, value: mean });
            }
            bidders.push(Bidder { index, mean });
        }
        // Stable: equal means keep their input order.
        bidders.sort_by(|a, b| b.mean.total_cmp(&a.mean));
        Ok(Self { bidders })
    }

    /// `n` bidders sharing the mean `m`.
    pub fn symmetric(n: usize, m: f64) -> Result<Self> {
        Self::new(&vec![m; n])
    }

    pub fn n(&self) -> usize {
        self.bidders.len()
    }

    /// Bidders by descending mean.
    pub fn bidders(&self) -> &[Bidder] {
        &self.bidders
    }

    /// Means in the caller's original order.
    pub fn means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for b in &self.bidders {
            out[b.index] = b.mean;
        }
        out
    }

    /// Average of the `l` largest means.
    pub fn top_mean(&self, l: usize) -> f64 {
        let l = l.clamp(1, self.n());
        self.bidders[..l].iter().map(|b| b.mean).sum::<f64>() / l as f64
    }
}

/// The active bidders: the top `k` means, their average and the lower bound `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActiveSet {
    pub k: usize,
    pub mbar_k: f64,
    pub alpha: f64,
}

/// The saddle point of the seller/nature game for one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    instance: AuctionInstance,
    active: ActiveSet,
    /// Selection weights of the active bidders, in descending-mean order.
    thetas: Vec<f64>,
}

impl Equilibrium {
    pub fn instance(&self) -> &AuctionInstance {
        &self.instance
    }

    pub fn active(&self) -> ActiveSet {
        self.active
    }

    pub fn k(&self) -> usize {
        self.active.k
    }

    pub fn alpha(&self) -> f64 {
        self.active.alpha
    }

    pub fn n(&self) -> usize {
        self.instance.n()
    }

    /// Equilibrium revenue, which equals `α`.
    pub fn revenue(&self) -> f64 {
        self.active.alpha
    }

    /// Selection weights `θᵢ` in descending-mean order.
    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn active_bidders(&self) -> &[Bidder] {
        &self.instance.bidders()[..self.active.k]
    }

    pub fn inactive_bidders(&self) -> &[Bidder] {
        &self.instance.bidders()[self.active.k..]
    }

    /// Selection weight of a bidder by original index; 0 for inactive bidders.
    pub fn theta_of(&self, index: usize) -> f64 {
        self.active_bidders()
            .iter()
            .position(|b| b.index == index)
            .map_or(0.0, |pos| self.thetas[pos])
    }

    /// True when some mean sits within `1e-12` of `α`, where the
    /// active/inactive split is decided by the strict inequality alone.
    pub fn boundary_tie(&self) -> bool {
        self.instance
            .bidders()
            .iter()
            .any(|b| (b.mean - self.active.alpha).abs() <= TIE_TOL)
    }

    /// Copy with `α` shifted by `delta` and every other field unchanged.
    /// Used to inject a known defect into verification.
    pub fn with_shifted_alpha(&self, delta: f64) -> Result<Self> {
        let alpha = self.active.alpha + delta;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain("with_shifted_alpha", alpha, "(0, 1)"));
        }
        let mut out = self.clone();
        out.active.alpha = alpha;
        Ok(out)
    }
}

/// Unique `α ∈ (0, mbar)` with `mbar = α(1 − ln(α)/k)`, by bisection.
///
/// The right-hand side is continuous and strictly increasing on `(0, 1)`,
/// running from 0 to 1, so the bracket always holds a single root.
pub fn solve_alpha(k: usize, mbar: f64) -> Result<f64> {
    if k == 0 {
        return Err(domain("solve_alpha", 0.0, "k >= 1"));
    }
    if !(mbar > 0.0 && mbar < 1.0) {
        return Err(domain("solve_alpha", mbar, "(0, 1)"));
    }
    let kf = k as f64;
    let f = |a: f64| a * (1.0 - a.ln() / kf) - mbar;

    let mut lo = ALPHA_EPS;
    if f(lo) >= 0.0 {
        lo = f64::MIN_POSITIVE;
    }
    let mut hi = mbar;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// `α = exp(k + W₋₁(−k·mbar·e⁻ᵏ))`; the cross-check for [`solve_alpha`].
pub fn alpha_closed_form(k: usize, mbar: f64) -> Result<f64> {
    if k == 0 {
        return Err(domain("alpha_closed_form", 0.0, "k >= 1"));
    }
    if !(mbar > 0.0 && mbar < 1.0) {
        return Err(domain("alpha_closed_form", mbar, "(0, 1)"));
    }
    let kf = k as f64;
    let x = -((kf * mbar).ln() - kf).exp();
    if x == 0.0 {
        return Err(domain("alpha_closed_form", kf, "k small enough that k·e^-k is representable"));
    }
    Ok((kf + lambert_w_minus1(x)?).exp())
}

/// Finds the active set by scanning down the sorted means: stop at the first
/// bidder whose mean does not exceed the `α` of the bidders above it.
pub fn cutoff_k(instance: &AuctionInstance) -> Result<ActiveSet> {
    let bidders = instance.bidders();
    let n = bidders.len();
    for (i, next) in bidders.iter().enumerate().skip(1) {
        let mbar = instance.top_mean(i);
        let alpha = solve_alpha(i, mbar)?;
        if next.mean <= alpha {
            return Ok(ActiveSet { k: i, mbar_k: mbar, alpha });
        }
    }
    let mbar = instance.top_mean(n);
    Ok(ActiveSet {
        k: n,
        mbar_k: mbar,
        alpha: solve_alpha(n, mbar)?,
    })
}

/// Cutoff, lower bound and selection weights `θᵢ = (mᵢ − α)/(−α ln α)`.
pub fn compute_equilibrium(instance: &AuctionInstance) -> Result<Equilibrium> {
    let active = cutoff_k(instance)?;
    let alpha = active.alpha;
    let scale = -alpha * alpha.ln();
    let thetas = instance.bidders()[..active.k]
        .iter()
        .map(|b| (b.mean - alpha) / scale)
        .collect();
    Ok(Equilibrium {
        instance: instance.clone(),
        active,
        thetas,
    })
}
