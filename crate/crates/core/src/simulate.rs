//! Monte Carlo second-price auctions with a random reserve.
//!
//! Randomness comes from ChaCha8 substreams: stream `s` of seed `x` owns a
//! fixed contiguous block of trial indices, so results depend only on
//! `(seed, trials, parallel_streams)` and never on thread scheduling.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{HighestValueDist, ReserveDist, ValueProfile, WorstCaseDist};
use crate::equilibrium::{compute_equilibrium, AuctionInstance, Equilibrium};
use crate::error::{domain, Result};

/// Random stream handed to samplers.
pub type StreamRng = ChaCha8Rng;

/// Outcome of one auction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuctionOutcome {
    pub winner: Option<usize>,
    pub revenue: f64,
}

/// Second-price auction with reserve: the top bidder (lowest index among
/// ties) wins iff its value strictly exceeds the reserve and pays
/// `max{v⁽²⁾, reserve}`.
pub fn run_auction(profile: &ValueProfile, reserve: f64) -> AuctionOutcome {
    let v1 = profile.first();
    if v1 > reserve {
        let winner = profile.values().iter().position(|&v| v == v1);
        AuctionOutcome { winner, revenue: profile.second().max(reserve) }
    } else {
        AuctionOutcome { winner: None, revenue: 0.0 }
    }
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub parallel_streams: usize,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64, parallel_streams: usize) -> Result<Self> {
        if trials == 0 {
            return Err(domain("SimConfig::trials", 0.0, "trials >= 1"));
        }
        if parallel_streams == 0 {
            return Err(domain("SimConfig::parallel_streams", 0.0, "streams >= 1"));
        }
        Ok(Self { trials, seed, parallel_streams })
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { trials: 1_000_000, seed: 0, parallel_streams: 16 }
    }
}

/// A joint value distribution that can be sampled from a stream.
pub trait ProfileSampler: Sync {
    fn sample(&self, rng: &mut StreamRng) -> ValueProfile;
}

/// A reserve-price distribution that can be sampled from a stream.
pub trait ReserveSampler: Sync {
    fn sample(&self, rng: &mut StreamRng) -> f64;
}

impl ProfileSampler for WorstCaseDist {
    fn sample(&self, rng: &mut StreamRng) -> ValueProfile {
        let u_select = rng.random::<f64>();
        let u_value = rng.random::<f64>();
        WorstCaseDist::sample(self, u_select, u_value)
    }
}

impl ReserveSampler for ReserveDist {
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        ReserveDist::sample(self, rng.random::<f64>())
    }
}

/// A deterministic reserve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedReserve(pub f64);

impl ReserveSampler for FixedReserve {
    fn sample(&self, _rng: &mut StreamRng) -> f64 {
        self.0
    }
}

/// All mass on one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMass(pub ValueProfile);

impl ProfileSampler for PointMass {
    fn sample(&self, _rng: &mut StreamRng) -> ValueProfile {
        self.0.clone()
    }
}

/// Independent marginals on `{0, 1}` with `P(vᵢ = 1) = mᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentTwoPoint {
    means: Vec<f64>,
}

impl ProfileSampler for IndependentTwoPoint {
    fn sample(&self, rng: &mut StreamRng) -> ValueProfile {
        let values = self
            .means
            .iter()
            .map(|&m| if rng.random::<f64>() < m { 1.0 } else { 0.0 })
            .collect();
        ValueProfile::new(values)
    }
}

/// Independent `Beta(c·mᵢ, c·(1 − mᵢ))` marginals.
#[derive(Debug, Clone)]
pub struct IndependentBeta {
    marginals: Vec<Beta<f64>>,
}

impl IndependentBeta {
    pub fn new(means: &[f64], concentration: f64) -> Result<Self> {
        let marginals = means
            .iter()
            .map(|&m| {
                Beta::new(concentration * m, concentration * (1.0 - m))
                    .map_err(|_| domain("IndependentBeta", m, "(0, 1)"))
            })
            .collect::<Result<_>>()?;
        Ok(Self { marginals })
    }
}

impl ProfileSampler for IndependentBeta {
    fn sample(&self, rng: &mut StreamRng) -> ValueProfile {
        ValueProfile::new(self.marginals.iter().map(|b| b.sample(rng)).collect())
    }
}

/// An L-shaped law with floor `β` in place of `α`. One active bidder,
/// picked with probability `θᵢ`, draws from `(1 − λ)·H_β + λ·δ₁`; the
/// others sit at `β`; with the leftover probability `1 − Σθᵢ` every active
/// bidder sits at `β`. Inactive bidders sit at their means.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedLShape {
    n: usize,
    beta: f64,
    lambda: f64,
    highest: HighestValueDist,
    /// (original index, cumulative selection weight)
    active: Vec<(usize, f64)>,
    inactive: Vec<(usize, f64)>,
}

impl ShiftedLShape {
    /// Builds the mean-preserving law with floor `beta` for the equilibrium's
    /// active set. Needs `β < m_k` and, below `α`, a top-value mean `≤ 1`.
    pub fn new(eq: &Equilibrium, beta: f64) -> Result<Self> {
        let active_bidders = eq.active_bidders();
        let k = active_bidders.len() as f64;
        let m_k = active_bidders.last().map_or(0.0, |b| b.mean);
        if !(beta > 0.0 && beta < m_k) {
            return Err(domain("ShiftedLShape", beta, "(0, m_k)"));
        }
        let mbar = eq.active().mbar_k;
        let h_mean = beta * (1.0 - beta.ln());
        let (lambda, spread) = if beta >= eq.alpha() {
            // Σθ ≤ 1 here; the remainder goes to the all-β corner.
            (0.0, -beta * beta.ln())
        } else {
            let mu = beta + k * (mbar - beta);
            if mu > 1.0 {
                return Err(domain("ShiftedLShape", beta, "top-value mean <= 1"));
            }
            ((mu - h_mean) / (1.0 - h_mean), mu - beta)
        };
        let mut cum = 0.0;
        let active = active_bidders
            .iter()
            .map(|b| {
                cum += (b.mean - beta) / spread;
                (b.index, cum)
            })
            .collect();
        Ok(Self {
            n: eq.n(),
            beta,
            lambda,
            highest: HighestValueDist::new(beta)?,
            active,
            inactive: eq.inactive_bidders().iter().map(|b| (b.index, b.mean)).collect(),
        })
    }

    /// Marginal mean of the bidder at active position `pos`.
    pub fn active_mean(&self, pos: usize) -> f64 {
        let prev = if pos == 0 { 0.0 } else { self.active[pos - 1].1 };
        let theta = self.active[pos].1 - prev;
        let top = (1.0 - self.lambda) * self.highest.mean() + self.lambda;
        theta * top + (1.0 - theta) * self.beta
    }
}

impl ProfileSampler for ShiftedLShape {
    fn sample(&self, rng: &mut StreamRng) -> ValueProfile {
        let u_select = rng.random::<f64>();
        let u_value = rng.random::<f64>();
        let u_atom = rng.random::<f64>();
        let chosen = self.active.iter().position(|&(_, cum)| u_select < cum);
        let mut values = vec![0.0; self.n];
        for (pos, &(index, _)) in self.active.iter().enumerate() {
            values[index] = if Some(pos) == chosen {
                if u_atom < self.lambda {
                    1.0
                } else {
                    self.highest.sample(u_value)
                }
            } else {
                self.beta
            };
        }
        for &(index, mean) in &self.inactive {
            values[index] = mean;
        }
        ValueProfile::new(values)
    }
}

/// Comonotone coupling of the marginals of `F*`: every active bidder's value
/// is its marginal quantile at one shared uniform draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ComonotoneMarginals {
    n: usize,
    highest: HighestValueDist,
    /// (original index, θ)
    active: Vec<(usize, f64)>,
    inactive: Vec<(usize, f64)>,
}

impl ComonotoneMarginals {
    pub fn new(eq: &Equilibrium) -> Self {
        Self {
            n: eq.n(),
            highest: HighestValueDist::new(eq.alpha()).expect("equilibrium alpha lies in (0, 1)"),
            active: eq
                .active_bidders()
                .iter()
                .zip(eq.thetas())
                .map(|(b, &t)| (b.index, t))
                .collect(),
            inactive: eq.inactive_bidders().iter().map(|b| (b.index, b.mean)).collect(),
        }
    }

    /// Quantile of the marginal `(1 − θ)·δ_α + θ·H`.
    fn quantile(&self, theta: f64, u: f64) -> f64 {
        let floor = 1.0 - theta;
        if u < floor {
            self.highest.alpha()
        } else {
            self.highest.sample(((u - floor) / theta).min(1.0 - f64::EPSILON))
        }
    }
}

impl ProfileSampler for ComonotoneMarginals {
    fn sample(&self, rng: &mut StreamRng) -> ValueProfile {
        let u = rng.random::<f64>();
        let mut values = vec![0.0; self.n];
        for &(index, theta) in &self.active {
            values[index] = self.quantile(theta, u);
        }
        for &(index, mean) in &self.inactive {
            values[index] = mean;
        }
        ValueProfile::new(values)
    }
}

/// A named adversarial distribution.
pub struct Candidate {
    pub name: &'static str,
    pub sampler: Box<dyn ProfileSampler>,
}

impl std::fmt::Debug for Candidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Candidate").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Concentration of the beta candidate.
pub const BETA_CONCENTRATION: f64 = 4.0;

/// Largest floor shift used by the shifted L-shape candidates.
pub const L_SHAPE_SHIFT: f64 = 0.01;

/// The fixed battery of value distributions matching the instance's means,
/// each of which must leave the seller at least `α` against `G*`.
pub fn adversarial_candidates(instance: &AuctionInstance) -> Result<Vec<Candidate>> {
    let eq = compute_equilibrium(instance)?;
    let means = instance.means();
    let alpha = eq.alpha();
    let m_k = eq.active_bidders().last().map_or(alpha, |b| b.mean);

    let mut out: Vec<Candidate> = vec![
        Candidate {
            name: "point_mass_at_means",
            sampler: Box::new(PointMass(ValueProfile::new(means.clone()))),
        },
        Candidate {
            name: "independent_two_point",
            sampler: Box::new(IndependentTwoPoint { means: means.clone() }),
        },
        Candidate {
            name: "independent_beta",
            sampler: Box::new(IndependentBeta::new(&means, BETA_CONCENTRATION)?),
        },
    ];

    let up = L_SHAPE_SHIFT.min((m_k - alpha) / 2.0);
    if up > 0.0 {
        out.push(Candidate {
            name: "l_shape_floor_up",
            sampler: Box::new(ShiftedLShape::new(&eq, alpha + up)?),
        });
    }
    let mut down = L_SHAPE_SHIFT.min(alpha / 2.0);
    let k = eq.k() as f64;
    if k > 1.0 {
        // Keep the top-value mean α(1 − ln α) + (k − 1)·ε below 1.
        down = down.min((1.0 - alpha * (1.0 - alpha.ln())) / (2.0 * (k - 1.0)));
    }
    out.push(Candidate {
        name: "l_shape_floor_down",
        sampler: Box::new(ShiftedLShape::new(&eq, alpha - down)?),
    });

    out.push(Candidate {
        name: "comonotone_marginals",
        sampler: Box::new(ComonotoneMarginals::new(&eq)),
    });
    out.push(Candidate { name: "worst_case", sampler: Box::new(WorstCaseDist::new(&eq)) });
    Ok(out)
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Self {
            count,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.count as f64 * w,
        }
    }
}

/// Trial index range `[start, end)` owned by each stream.
fn blocks(config: &SimConfig) -> Vec<(u64, u64)> {
    let s = config.parallel_streams as u64;
    (0..s).map(|i| (config.trials * i / s, config.trials * (i + 1) / s)).collect()
}

fn stream_rng(seed: u64, stream: usize) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn one_trial(f: &dyn ProfileSampler, g: &dyn ReserveSampler, rng: &mut StreamRng) -> f64 {
    let profile = f.sample(rng);
    let reserve = g.sample(rng);
    run_auction(&profile, reserve).revenue
}

/// Monte Carlo estimate of `Ψ(F, G)`.
pub fn estimate_psi(f: &dyn ProfileSampler, g: &dyn ReserveSampler, config: &SimConfig) -> Estimate {
    let parts: Vec<Moments> = blocks(config)
        .into_par_iter()
        .enumerate()
        .map(|(stream, (start, end))| {
            let mut rng = stream_rng(config.seed, stream);
            let mut acc = Moments::default();
            for _ in start..end {
                acc.push(one_trial(f, g, &mut rng));
            }
            acc
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let variance = if total.count > 1 { total.m2 / (total.count - 1) as f64 } else { 0.0 };
    Estimate {
        mean: total.mean,
        std_error: (variance / total.count as f64).sqrt(),
        trials: total.count,
    }
}

/// Every trial's revenue, in trial order.
pub fn revenue_samples(f: &dyn ProfileSampler, g: &dyn ReserveSampler, config: &SimConfig) -> Vec<f64> {
    blocks(config)
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(stream, (start, end))| {
            let mut rng = stream_rng(config.seed, stream);
            (start..end).map(move |_| one_trial(f, g, &mut rng))
        })
        .collect()
}

/// Estimate for one adversarial candidate against `G*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateEstimate {
    pub name: &'static str,
    pub estimate: Estimate,
    /// `estimate ≥ α − 3·s.e.`
    pub above_floor: bool,
}

/// Runs every adversarial candidate against `G*`.
pub fn floor_test(instance: &AuctionInstance, config: &SimConfig) -> Result<Vec<CandidateEstimate>> {
    let eq = compute_equilibrium(instance)?;
    let g = ReserveDist::for_equilibrium(&eq);
    let alpha = eq.alpha();
    Ok(adversarial_candidates(instance)?
        .iter()
        .map(|c| {
            let estimate = estimate_psi(c.sampler.as_ref(), &g, config);
            CandidateEstimate {
                name: c.name,
                estimate,
                above_floor: estimate.mean >= alpha - 3.0 * estimate.std_error,
            }
        })
        .collect())
}

/// One row of the symmetric-mean sweep over `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub alpha_n: f64,
    /// `G*((0, 1]) = −ln α/(n − 1 − ln α)`.
    pub reserve_mass_above_zero: f64,
    /// Equilibrium revenue, or its Monte Carlo estimate.
    pub revenue: f64,
    /// Standard error when `revenue` is a Monte Carlo estimate.
    pub stderr: Option<f64>,
}

/// Analytic sweep for `n` symmetric bidders with mean `m`.
pub fn asymptotic_sweep(m: f64, n_list: &[usize]) -> Result<Vec<SweepRow>> {
    n_list
        .iter()
        .map(|&n| {
            let eq = compute_equilibrium(&AuctionInstance::symmetric(n, m)?)?;
            Ok(SweepRow {
                n,
                alpha_n: eq.alpha(),
                reserve_mass_above_zero: ReserveDist::for_equilibrium(&eq).mass_above_zero(),
                revenue: eq.revenue(),
                stderr: None,
            })
        })
        .collect()
}

/// Sweep whose revenue column is `Ψ(F*, G*)` estimated by simulation.
pub fn monte_carlo_sweep(m: f64, n_list: &[usize], config: &SimConfig) -> Result<Vec<SweepRow>> {
    let mut rows = asymptotic_sweep(m, n_list)?;
    for row in &mut rows {
        let eq = compute_equilibrium(&AuctionInstance::symmetric(row.n, m)?)?;
        let est = estimate_psi(&WorstCaseDist::new(&eq), &ReserveDist::for_equilibrium(&eq), config);
        row.revenue = est.mean;
        row.stderr = Some(est.std_error);
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "n,alpha,mass_above_zero,revenue,stderr";

/// Writes sweep rows under [`CSV_HEADER`]; an analytic row leaves `stderr` empty.
pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        let stderr = r.stderr.map(|s| format!("{s:.17e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{:.17},{:.17},{:.17},{}",
            r.n, r.alpha_n, r.reserve_mass_above_zero, r.revenue, stderr
        )?;
    }
    Ok(())
}

impl From<Estimate> for (f64, f64) {
    fn from(e: Estimate) -> Self {
        (e.mean, e.std_error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> ValueProfile {
        ValueProfile::new(v.to_vec())
    }

    #[test]
    fn auction_examples() {
        assert_eq!(run_auction(&p(&[0.8, 0.3]), 0.5), AuctionOutcome { winner: Some(0), revenue: 0.5 });
        assert_eq!(run_auction(&p(&[0.8, 0.3]), 0.9), AuctionOutcome { winner: None, revenue: 0.0 });
        assert_eq!(run_auction(&p(&[0.5, 0.5]), 0.5).winner, None);
        assert_eq!(run_auction(&p(&[0.3, 0.7, 0.7]), 0.1), AuctionOutcome { winner: Some(1), revenue: 0.7 });
        assert_eq!(run_auction(&p(&[0.4, 0.2]), 0.1).revenue, 0.2);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0, 1, 1).is_err());
        assert!(SimConfig::new(1, 1, 0).is_err());
        assert!(SimConfig::new(1, 1, 1).is_ok());
    }

    #[test]
    fn blocks_cover_all_trials() {
        let c = SimConfig::new(1003, 0, 7).unwrap();
        let b = blocks(&c);
        assert_eq!(b[0].0, 0);
        assert_eq!(b.last().unwrap().1, 1003);
        assert!(b.windows(2).all(|w| w[0].1 == w[1].0));
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 / 3.0).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..40].iter().for_each(|&x| a.push(x));
        xs[40..].iter().for_each(|&x| b.push(x));
        let merged = a.merge(b);
        assert_eq!(merged.count, whole.count);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.m2 - whole.m2).abs() < 1e-9);
    }

    #[test]
    fn zero_reserve_against_worst_case_is_exact() {
        let eq = compute_equilibrium(&AuctionInstance::symmetric(2, 0.5).unwrap()).unwrap();
        let est = estimate_psi(&WorstCaseDist::new(&eq), &FixedReserve(0.0), &SimConfig::new(10_000, 3, 4).unwrap());
        assert_eq!(est.mean, eq.alpha());
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn shifted_l_shape_preserves_means() {
        for means in [vec![0.5, 0.5], vec![0.6, 0.5, 0.1], vec![0.7, 0.6, 0.55], vec![0.5]] {
            let eq = compute_equilibrium(&AuctionInstance::new(&means).unwrap()).unwrap();
            for beta in [eq.alpha() - 0.01, eq.alpha() + 0.01] {
                let l = ShiftedLShape::new(&eq, beta).unwrap();
                assert!(l.active.last().unwrap().1 <= 1.0 + 1e-12);
                for (pos, b) in eq.active_bidders().iter().enumerate() {
                    assert!((l.active_mean(pos) - b.mean).abs() < 1e-12, "{means:?} {beta}");
                }
            }
        }
    }

    #[test]
    fn candidate_battery_is_complete() {
        let names: Vec<_> = adversarial_candidates(&AuctionInstance::symmetric(2, 0.5).unwrap())
            .unwrap()
            .iter()
            .map(|c| c.name)
            .collect();
        for want in [
            "point_mass_at_means",
            "independent_two_point",
            "independent_beta",
            "l_shape_floor_up",
            "l_shape_floor_down",
            "comonotone_marginals",
            "worst_case",
        ] {
            assert!(names.contains(&want), "{want}");
        }
        // Large symmetric instances still get a valid downward shift.
        assert!(adversarial_candidates(&AuctionInstance::symmetric(200, 0.5).unwrap()).is_ok());
    }

    #[test]
    fn sweep_single_buyer_has_no_zero_atom() {
        let rows = asymptotic_sweep(0.5, &[1]).unwrap();
        assert!((rows[0].reserve_mass_above_zero - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let rows = asymptotic_sweep(0.5, &[2, 3]).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let first: Vec<_> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 5);
        assert_eq!(first[0], "2");
        assert_eq!(first[4], "");
    }
}
