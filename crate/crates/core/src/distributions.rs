//! The three equilibrium laws: the highest value `H`, the seller's random
//! reserve `G*`, and nature's joint worst case `F*`.
//!
//! CDFs are right-continuous with atoms included at their support point.
//! Samplers take their uniform draws as arguments so that callers own the
//! random stream.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::equilibrium::Equilibrium;
use crate::error::{domain, Result};

/// A value profile with its top two order statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueProfile {
    values: Vec<f64>,
    first: f64,
    second: f64,
}

impl ValueProfile {
    /// With a single bidder the second-highest value is 0.
    pub fn new(values: Vec<f64>) -> Self {
        let (mut first, mut second) = (0.0_f64, 0.0_f64);
        for (i, &v) in values.iter().enumerate() {
            if i == 0 || v > first {
                if i > 0 {
                    second = first;
                }
                first = v;
            } else if i == 1 || v > second {
                second = v;
            }
        }
        Self { values, first, second }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first(&self) -> f64 {
        self.first
    }

    pub fn second(&self) -> f64 {
        self.second
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Restriction to the given bidder positions.
    pub fn project(&self, indices: &[usize]) -> ValueProfile {
        ValueProfile::new(indices.iter().map(|&i| self.values[i]).collect())
    }
}

/// Law of the highest value: density `α/v²` on `(α, 1)` and an atom `α` at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HighestValueDist {
    alpha: f64,
}

impl HighestValueDist {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain("HighestValueDist", alpha, "(0, 1)"));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// CDF extended to the whole real line.
    pub fn cdf(&self, v: f64) -> f64 {
        if v >= 1.0 {
            1.0
        } else if v <= self.alpha {
            0.0
        } else {
            (v - self.alpha) / v
        }
    }

    /// `H(1⁻) = 1 − α`.
    pub fn left_limit_at_one(&self) -> f64 {
        1.0 - self.alpha
    }

    /// Density of the continuous part.
    pub fn density(&self, v: f64) -> f64 {
        if v > self.alpha && v < 1.0 {
            self.alpha / (v * v)
        } else {
            0.0
        }
    }

    pub fn atom_at_one(&self) -> f64 {
        self.alpha
    }

    pub fn mean(&self) -> f64 {
        self.alpha * (1.0 - self.alpha.ln())
    }

    /// Inverse-CDF draw from `u ∈ [0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        if u < 1.0 - self.alpha {
            (self.alpha / (1.0 - u)).min(1.0)
        } else {
            1.0
        }
    }
}

/// The seller's reserve law: atom `(k−1)/(k−1−ln α)` at 0 and density
/// `1/(p(k−1−ln α))` on `(α, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReserveDist {
    alpha: f64,
    k: usize,
}

impl ReserveDist {
    pub fn new(alpha: f64, k: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain("ReserveDist", alpha, "(0, 1)"));
        }
        if k == 0 {
            return Err(domain("ReserveDist", 0.0, "k >= 1"));
        }
        Ok(Self { alpha, k })
    }

    pub fn for_equilibrium(eq: &Equilibrium) -> Self {
        Self { alpha: eq.alpha(), k: eq.k() }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `k − 1 − ln α`, the normalizer shared by the atom and the density.
    pub fn normalizer(&self) -> f64 {
        (self.k - 1) as f64 - self.alpha.ln()
    }

    /// Mass of the zero reserve.
    pub fn atom_at_zero(&self) -> f64 {
        (self.k - 1) as f64 / self.normalizer()
    }

    /// `G*((0, 1]) = −ln α/(k − 1 − ln α)`.
    pub fn mass_above_zero(&self) -> f64 {
        -self.alpha.ln() / self.normalizer()
    }

    pub fn density(&self, p: f64) -> f64 {
        if p > self.alpha && p <= 1.0 {
            1.0 / (p * self.normalizer())
        } else {
            0.0
        }
    }

    pub fn cdf(&self, p: f64) -> f64 {
        if p < 0.0 {
            0.0
        } else if p >= 1.0 {
            1.0
        } else if p <= self.alpha {
            self.atom_at_zero()
        } else {
            self.atom_at_zero() + (p / self.alpha).ln() / self.normalizer()
        }
    }

    pub fn sample(&self, u: f64) -> f64 {
        let g0 = self.atom_at_zero();
        if u < g0 {
            0.0
        } else {
            (self.alpha * ((u - g0) * self.normalizer()).exp()).min(1.0)
        }
    }
}

/// Nature's "L-shaped" worst case: one active bidder, picked with
/// probability `θᵢ`, draws from `H`; the other active bidders sit at `α`;
/// inactive bidders sit at their means.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseDist {
    n: usize,
    alpha: f64,
    highest: HighestValueDist,
    /// (original index, cumulative selection weight)
    active: Vec<(usize, f64)>,
    thetas: Vec<f64>,
    /// (original index, mean)
    inactive: Vec<(usize, f64)>,
}

impl WorstCaseDist {
    pub fn new(eq: &Equilibrium) -> Self {
        let mut cum = 0.0;
        let active = eq
            .active_bidders()
            .iter()
            .zip(eq.thetas())
            .map(|(b, &t)| {
                cum += t;
                (b.index, cum)
            })
            .collect();
        Self {
            n: eq.n(),
            alpha: eq.alpha(),
            highest: HighestValueDist { alpha: eq.alpha() },
            active,
            thetas: eq.thetas().to_vec(),
            inactive: eq.inactive_bidders().iter().map(|b| (b.index, b.mean)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.active.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn highest(&self) -> &HighestValueDist {
        &self.highest
    }

    /// Original indices of the active bidders, descending mean.
    pub fn active_indices(&self) -> Vec<usize> {
        self.active.iter().map(|&(i, _)| i).collect()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn inactive(&self) -> &[(usize, f64)] {
        &self.inactive
    }

    /// The second-highest value whenever the selected bidder draws above `α`:
    /// `α` itself with two or more active bidders, otherwise the largest
    /// inactive mean (or 0 for a lone bidder).
    pub fn runner_up_value(&self) -> f64 {
        if self.k() >= 2 {
            self.alpha
        } else {
            self.inactive.iter().map(|&(_, m)| m).fold(0.0, f64::max)
        }
    }

    /// Draws one profile, in original bidder order.
    pub fn sample(&self, u_select: f64, u_value: f64) -> ValueProfile {
        let chosen = self
            .active
            .iter()
            .position(|&(_, cum)| u_select < cum)
            .unwrap_or(self.active.len() - 1);
        let mut values = vec![0.0; self.n];
        for (pos, &(index, _)) in self.active.iter().enumerate() {
            values[index] = if pos == chosen {
                self.highest.sample(u_value)
            } else {
                self.alpha
            };
        }
        for &(index, mean) in &self.inactive {
            values[index] = mean;
        }
        ValueProfile::new(values)
    }

    /// Support point where the active bidder at position `pos` has value `x`.
    pub fn support_point(&self, pos: usize, x: f64) -> ValueProfile {
        let mut values = vec![0.0; self.n];
        for (p, &(index, _)) in self.active.iter().enumerate() {
            values[index] = if p == pos { x } else { self.alpha };
        }
        for &(index, mean) in &self.inactive {
            values[index] = mean;
        }
        ValueProfile::new(values)
    }

    /// Marginal CDF of one bidder (original index): `(1 − θ)·δ_α + θ·H`
    /// for active bidders, a point mass at the mean otherwise.
    pub fn marginal_cdf(&self, index: usize, v: f64) -> f64 {
        if let Some(pos) = self.active.iter().position(|&(i, _)| i == index) {
            let theta = self.thetas[pos];
            if v < self.alpha {
                0.0
            } else {
                (1.0 - theta) + theta * self.highest.cdf(v)
            }
        } else {
            let mean = self
                .inactive
                .iter()
                .find(|&&(i, _)| i == index)
                .map_or(0.0, |&(_, m)| m);
            if v < mean {
                0.0
            } else {
                1.0
            }
        }
    }

    /// Marginal mean of one bidder under this law.
    pub fn marginal_mean(&self, index: usize) -> f64 {
        if let Some(pos) = self.active.iter().position(|&(i, _)| i == index) {
            let theta = self.thetas[pos];
            theta * self.highest.mean() + (1.0 - theta) * self.alpha
        } else {
            self.inactive
                .iter()
                .find(|&&(i, _)| i == index)
                .map_or(0.0, |&(_, m)| m)
        }
    }

    pub fn record(&self) -> DistributionRecord {
        DistributionRecord {
            alpha: self.alpha,
            k: self.k(),
            thetas: self.thetas.clone(),
            inactive_means: self.inactive.iter().map(|&(_, m)| m).collect(),
        }
    }
}

pub fn h_cdf(d: &HighestValueDist, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(domain("h_cdf", v, "[0, 1]"));
    }
    Ok(d.cdf(v))
}

pub fn h_sample(d: &HighestValueDist, u: f64) -> f64 {
    d.sample(u)
}

pub fn g_cdf(d: &ReserveDist, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("g_cdf", p, "[0, 1]"));
    }
    Ok(d.cdf(p))
}

pub fn g_sample(d: &ReserveDist, u: f64) -> f64 {
    d.sample(u)
}

pub fn f_sample(d: &WorstCaseDist, u_select: f64, u_value: f64) -> ValueProfile {
    d.sample(u_select, u_value)
}

/// Number of grid points used by [`fosd_compare`].
pub const FOSD_GRID: usize = 10_000;

/// True iff `h_large` first-order dominates `h_small`: its CDF lies weakly
/// below on a uniform grid of `[0, 1]`.
pub fn fosd_compare(h_small: &HighestValueDist, h_large: &HighestValueDist) -> bool {
    (0..FOSD_GRID).all(|i| {
        let v = i as f64 / (FOSD_GRID - 1) as f64;
        h_large.cdf(v) <= h_small.cdf(v)
    })
}

/// Plain-text export of the equilibrium laws, one `key=value` line each.
/// Lines starting with `#` are comments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionRecord {
    pub alpha: f64,
    pub k: usize,
    pub thetas: Vec<f64>,
    pub inactive_means: Vec<f64>,
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for DistributionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "alpha={}", self.alpha)?;
        writeln!(f, "k={}", self.k)?;
        writeln!(f, "thetas={}", join(&self.thetas))?;
        writeln!(f, "inactive_means={}", join(&self.inactive_means))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("malformed distribution record: {0}")]
pub struct RecordError(String);

impl FromStr for DistributionRecord {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut alpha = None;
        let mut k = None;
        let mut thetas = None;
        let mut inactive = None;
        let list = |v: &str| -> Result<Vec<f64>, RecordError> {
            if v.trim().is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| RecordError(e.to_string())))
                .collect()
        };
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| RecordError(format!("no '=' in {line:?}")))?;
            match key.trim() {
                "alpha" => {
                    alpha = Some(value.trim().parse().map_err(|e| RecordError(format!("{e}")))?)
                }
                "k" => k = Some(value.trim().parse().map_err(|e| RecordError(format!("{e}")))?),
                "thetas" => thetas = Some(list(value)?),
                "inactive_means" => inactive = Some(list(value)?),
                other => return Err(RecordError(format!("unknown key {other:?}"))),
            }
        }
        let missing = |name: &str| RecordError(format!("missing {name}"));
        Ok(Self {
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
            k: k.ok_or_else(|| missing("k"))?,
            thetas: thetas.ok_or_else(|| missing("thetas"))?,
            inactive_means: inactive.ok_or_else(|| missing("inactive_means"))?,
        })
    }
}
