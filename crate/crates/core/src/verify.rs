//! Numerical certification of the saddle point.
//!
//! The seller side checks that every reserve on the support of `G*` earns
//! exactly `α` against `F*` and that no other reserve earns more. The nature
//! side checks that `φ(·; G*)` dominates the affine certificate `L`
//! everywhere and touches it on the support of `F*`. Both feed a single
//! serializable [`VerificationReport`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{ReserveDist, ValueProfile, WorstCaseDist};
use crate::equilibrium::{compute_equilibrium, AuctionInstance, Equilibrium};
use crate::error::{Error, Result};
use crate::game_oracle::{build_game, solve_minimax};
use crate::revenue::{certificate, eta, phi, AffineCertificate};

/// Support samples used by [`verify_nature_best_response`].
pub const DEFAULT_SUPPORT_SAMPLES: usize = 1000;

/// Corner profiles `{α, 1}ᵏ` are enumerated up to this `k`, sampled above it.
pub const MAX_ENUMERATED_CORNER_DIM: usize = 20;

const CHUNK: usize = 4096;
const QUADRATURE_INTERVALS: usize = 2000;

/// Grid sizes and tolerance of the optional LP cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub value_grid: usize,
    pub reserve_grid: usize,
    /// Allowed `|LP value − α|`.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { value_grid: 101, reserve_grid: 101, tolerance: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    /// Reserve grid for the seller check.
    pub grid_size: usize,
    /// Stratified profiles for the certificate check.
    pub samples: usize,
    /// Support points for the tightness check.
    pub support_samples: usize,
    pub seed: u64,
    pub analytic_tol: f64,
    /// Allowed negative certificate slack.
    pub slack_tol: f64,
    pub oracle: Option<OracleConfig>,
    /// Shift applied to nature's `α` only, to exercise the failure path.
    pub perturb_alpha: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            grid_size: 10_000,
            samples: 100_000,
            support_samples: DEFAULT_SUPPORT_SAMPLES,
            seed: 0,
            analytic_tol: 1e-9,
            slack_tol: 1e-9,
            oracle: None,
            perturb_alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SellerReport {
    pub grid_size: usize,
    /// Max of `|η − α|` on the support of `G*` and `(η − α)⁺` off it.
    pub max_indifference_residual: f64,
    pub worst_reserve: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NatureReport {
    pub profiles_checked: usize,
    /// `min (φ − L)` over every checked profile.
    pub min_certificate_slack: f64,
    pub worst_profile: Vec<f64>,
    /// Min slack in the regions `v₂ > α`, `v₁ ≥ α ≥ v₂` and `α > v₁`
    /// (`None` when a region is empty, as `v₂ > α` is for one bidder).
    pub region_min_slack: [Option<f64>; 3],
    pub corner_min_slack: f64,
    pub corners_enumerated: bool,
    pub all_zeros_slack: f64,
    pub all_ones_slack: f64,
    /// `max |φ − L|` over support points of nature's law.
    pub max_support_gap: f64,
    pub support_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProjectionReport {
    /// Every bidder is active.
    Skipped,
    Checked {
        /// `max |φ(full) − φ(projected)|` on the support.
        max_support_deviation: f64,
        /// `min φ(full) − φ(projected)` over random profiles.
        min_random_gain: f64,
        /// Random profiles where the full auction earns strictly more.
        strict_gains: usize,
        samples: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassResiduals {
    pub h: f64,
    pub g: f64,
    pub f: f64,
}

/// Worst-case residuals of every saddle-point condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub boundary_tie: bool,
    pub perturb_alpha: f64,
    pub max_indifference_residual: f64,
    pub min_certificate_slack: f64,
    pub max_support_gap: f64,
    /// `|marginal mean − mᵢ|` per bidder, original order.
    pub mean_constraint_residuals: Vec<f64>,
    pub mass_residuals: MassResiduals,
    /// `|∫ v dH − α(1 − ln α)|` by quadrature.
    pub h_mean_residual: f64,
    pub game_value_gap: Option<f64>,
    pub seller: SellerReport,
    pub nature: NatureReport,
    pub projection: ProjectionReport,
    /// Failed sub-checks, in words.
    pub failures: Vec<String>,
    pub passed: bool,
}

fn rng_for(seed: u64, region: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((region << 32) | chunk);
    rng
}

fn reserve_grid(size: usize) -> Vec<f64> {
    let top = 1.0 - 1e-9;
    (0..size).map(|i| top * i as f64 / (size - 1) as f64).collect()
}

fn seller_check(nature: &WorstCaseDist, g: &ReserveDist, claimed: f64, grid_size: usize) -> Result<SellerReport> {
    if grid_size < 2 {
        return Err(Error::GridTooSmall(grid_size));
    }
    let alpha = g.alpha();
    let mut grid = reserve_grid(grid_size);
    grid.push(alpha);
    let (worst_reserve, residual) = grid
        .into_iter()
        .map(|p| {
            let gap = eta(p, nature) - claimed;
            let on_support = p > alpha || (p == 0.0 && g.atom_at_zero() > 0.0);
            (p, if on_support { gap.abs() } else { gap.max(0.0) })
        })
        .fold((0.0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(SellerReport { grid_size, max_indifference_residual: residual, worst_reserve })
}

/// Checks that `G*` is a best response to `F*` on a reserve grid of `[0, 1)`.
pub fn verify_seller_best_response(eq: &Equilibrium, grid_size: usize) -> Result<SellerReport> {
    seller_check(&WorstCaseDist::new(eq), &ReserveDist::for_equilibrium(eq), eq.alpha(), grid_size)
}

fn slack(values: &[f64], g: &ReserveDist, cert: &AffineCertificate) -> f64 {
    phi(&ValueProfile::new(values.to_vec()), g) - cert.evaluate(values)
}

/// One profile from region `r` of `[0, 1]ᵏ`: `v₂ > α`, `v₁ ≥ α ≥ v₂` or `α > v₁`.
fn stratified_profile(rng: &mut ChaCha8Rng, k: usize, alpha: f64, region: usize) -> Vec<f64> {
    let above = |rng: &mut ChaCha8Rng| alpha + (1.0 - alpha) * (1.0 - rng.random::<f64>());
    let below = |rng: &mut ChaCha8Rng| alpha * rng.random::<f64>();
    let mut v = vec![0.0; k];
    match region {
        0 => {
            let i = rng.random_range(0..k);
            let j = (i + rng.random_range(1..k)) % k;
            for (p, x) in v.iter_mut().enumerate() {
                *x = if p == i || p == j { above(rng) } else { rng.random::<f64>() };
            }
        }
        1 => {
            let i = rng.random_range(0..k);
            for (p, x) in v.iter_mut().enumerate() {
                // The top value may sit exactly at α.
                *x = if p != i {
                    below(rng)
                } else if rng.random_range(0..64) == 0 {
                    alpha
                } else {
                    above(rng)
                };
            }
        }
        _ => {
            for x in v.iter_mut() {
                *x = below(rng) * (1.0 - f64::EPSILON);
            }
        }
    }
    v
}

/// Min slack and its profile over `count` profiles drawn by `draw`.
fn min_slack_par<F>(count: usize, seed: u64, region: u64, draw: F, g: &ReserveDist, cert: &AffineCertificate) -> (f64, Vec<f64>)
where
    F: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(seed, region, c as u64);
            let len = CHUNK.min(count - c * CHUNK);
            (0..len)
                .map(|_| {
                    let v = draw(&mut rng);
                    (slack(&v, g, cert), v)
                })
                .fold((f64::INFINITY, Vec::new()), |a, b| if b.0 < a.0 { b } else { a })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::INFINITY, Vec::new()), |a, b| if b.0 < a.0 { b } else { a })
}

fn nature_check(
    nature: &WorstCaseDist,
    g: &ReserveDist,
    cert: &AffineCertificate,
    samples: usize,
    support_samples: usize,
    seed: u64,
) -> NatureReport {
    let k = g.k();
    let alpha = g.alpha();
    let regions: Vec<usize> = if k >= 2 { vec![0, 1, 2] } else { vec![1, 2] };
    let per_region = samples.div_ceil(regions.len());

    let mut region_min_slack = [None; 3];
    let mut worst = (f64::INFINITY, Vec::new());
    let mut checked = 0;
    for &r in &regions {
        let res = min_slack_par(per_region, seed, r as u64, |rng| stratified_profile(rng, k, alpha, r), g, cert);
        region_min_slack[r] = Some(res.0);
        checked += per_region;
        if res.0 < worst.0 {
            worst = res;
        }
    }

    let corners_enumerated = k <= MAX_ENUMERATED_CORNER_DIM;
    let corner = |bits: u64| -> Vec<f64> {
        (0..k).map(|i| if bits >> (i % 64) & 1 == 1 { 1.0 } else { alpha }).collect()
    };
    let corner_res = if corners_enumerated {
        (0..1u64 << k)
            .into_par_iter()
            .map(|bits| {
                let v = corner(bits);
                (slack(&v, g, cert), v)
            })
            .reduce(|| (f64::INFINITY, Vec::new()), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
    } else {
        let count = 1 << MAX_ENUMERATED_CORNER_DIM;
        min_slack_par(
            count,
            seed,
            3,
            |rng| (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { alpha }).collect(),
            g,
            cert,
        )
    };
    checked += if corners_enumerated { 1 << k } else { 1 << MAX_ENUMERATED_CORNER_DIM };
    let corner_min_slack = corner_res.0;
    if corner_res.0 < worst.0 {
        worst = corner_res;
    }

    let zeros = vec![0.0; k];
    let ones = vec![1.0; k];
    let all_zeros_slack = slack(&zeros, g, cert);
    let all_ones_slack = slack(&ones, g, cert);
    checked += 2;
    for (s, v) in [(all_zeros_slack, zeros), (all_ones_slack, ones)] {
        if s < worst.0 {
            worst = (s, v);
        }
    }

    // Support points: the selected bidder cycles through the active set and
    // its value sweeps (floor, 1], ending at the atom at 1.
    let active = nature.active_indices();
    let floor = nature.alpha();
    let mut max_support_gap = 0.0_f64;
    for i in 0..support_samples {
        let x = floor + (1.0 - floor) * (i + 1) as f64 / support_samples as f64;
        let v = nature.support_point(i % k, x).project(&active);
        let s = slack(v.values(), g, cert);
        max_support_gap = max_support_gap.max(s.abs());
        worst = if s < worst.0 { (s, v.values().to_vec()) } else { worst };
    }
    checked += support_samples;

    NatureReport {
        profiles_checked: checked,
        min_certificate_slack: worst.0,
        worst_profile: worst.1,
        region_min_slack,
        corner_min_slack,
        corners_enumerated,
        all_zeros_slack,
        all_ones_slack,
        max_support_gap,
        support_points: support_samples,
    }
}

/// Checks `φ(·; G*) ≥ L` on stratified profiles, the `{α, 1}ᵏ` corners and
/// the extreme profiles, and `φ = L` on the support of `F*`.
pub fn verify_nature_best_response(eq: &Equilibrium, samples: usize, seed: u64) -> NatureReport {
    nature_check(
        &WorstCaseDist::new(eq),
        &ReserveDist::for_equilibrium(eq),
        &certificate(eq),
        samples,
        DEFAULT_SUPPORT_SAMPLES,
        seed,
    )
}

fn projection_check(nature: &WorstCaseDist, g: &ReserveDist, samples: usize, seed: u64) -> ProjectionReport {
    let (n, k) = (nature.n(), nature.k());
    if k == n {
        return ProjectionReport::Skipped;
    }
    let active = nature.active_indices();
    let gain = |v: &ValueProfile| phi(v, g) - phi(&v.project(&active), g);

    let floor = nature.alpha();
    let max_support_deviation = (0..samples.max(1))
        .map(|i| {
            let x = floor + (1.0 - floor) * (i + 1) as f64 / samples.max(1) as f64;
            gain(&nature.support_point(i % k, x)).abs()
        })
        .fold(0.0, f64::max);

    let chunks = samples.div_ceil(CHUNK);
    let (min_random_gain, strict_gains) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(seed, 4, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len).fold((f64::INFINITY, 0usize), |(lo, strict), _| {
                let v = ValueProfile::new((0..n).map(|_| rng.random::<f64>()).collect());
                let d = gain(&v);
                (lo.min(d), strict + usize::from(d > 1e-12))
            })
        })
        .reduce(|| (f64::INFINITY, 0), |a, b| (a.0.min(b.0), a.1 + b.1));

    ProjectionReport::Checked { max_support_deviation, min_random_gain, strict_gains, samples }
}

/// Compares the `n`-bidder auction with its restriction to the active
/// bidders: equal on the support of `F*`, never smaller elsewhere.
pub fn verify_k_projection(eq: &Equilibrium, samples: usize, seed: u64) -> ProjectionReport {
    projection_check(&WorstCaseDist::new(eq), &ReserveDist::for_equilibrium(eq), samples, seed)
}

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Quadrature residuals of `H` and `G*` (in `s = ln v`) and the selection
/// mass of `F*`.
fn mass_residuals(nature: &WorstCaseDist, g: &ReserveDist) -> (MassResiduals, f64) {
    let h = nature.highest();
    let a = h.alpha();
    let lo = a.ln();
    // dH = α/v² dv = α·e^{−s} ds on (α, 1).
    let h_mass = h.atom_at_one() + simpson(|s| a * (-s).exp(), lo, 0.0, QUADRATURE_INTERVALS);
    let h_mean = h.atom_at_one() + simpson(|_| a, lo, 0.0, QUADRATURE_INTERVALS);
    let ga = g.alpha();
    let g_mass = g.atom_at_zero() + simpson(|_| 1.0 / g.normalizer(), ga.ln(), 0.0, QUADRATURE_INTERVALS);
    let f_mass: f64 = nature.thetas().iter().sum();
    (
        MassResiduals { h: (h_mass - 1.0).abs(), g: (g_mass - 1.0).abs(), f: (f_mass - 1.0).abs() },
        (h_mean - h.mean()).abs(),
    )
}

/// Runs every check and aggregates them into one report.
///
/// With `perturb_alpha = δ ≠ 0`, nature's law is built from `α + δ` while
/// `G*`, `L` and the claimed revenue keep the true `α`, so a correct
/// verifier must fail with residuals of order `δ`.
pub fn run_full_verification(instance: &AuctionInstance, config: &VerifyConfig) -> Result<VerificationReport> {
    let eq = compute_equilibrium(instance)?;
    let nature_eq = if config.perturb_alpha != 0.0 {
        eq.with_shifted_alpha(config.perturb_alpha)?
    } else {
        eq.clone()
    };
    let nature = WorstCaseDist::new(&nature_eq);
    let g = ReserveDist::for_equilibrium(&eq);
    let cert = certificate(&eq);
    let alpha = eq.alpha();

    let (seller, (nature_report, (projection, oracle))) = rayon::join(
        || seller_check(&nature, &g, alpha, config.grid_size),
        || {
            rayon::join(
                || nature_check(&nature, &g, &cert, config.samples, config.support_samples, config.seed),
                || {
                    rayon::join(
                        || projection_check(&nature, &g, config.samples.min(config.support_samples.max(1) * 10), config.seed),
                        || {
                            config.oracle.map(|oc| {
                                build_game(instance, oc.value_grid, oc.reserve_grid)
                                    .and_then(|game| solve_minimax(&game))
                                    .map(|sol| (sol.game_value - alpha).abs())
                            })
                        },
                    )
                },
            )
        },
    );
    let seller = seller?;

    let mean_constraint_residuals: Vec<f64> = eq
        .instance()
        .means()
        .iter()
        .enumerate()
        .map(|(i, &m)| (nature.marginal_mean(i) - m).abs())
        .collect();
    let (mass, h_mean_residual) = mass_residuals(&nature, &g);

    let tol = config.analytic_tol;
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    check(
        seller.max_indifference_residual <= tol,
        format!("seller indifference residual {:e} at reserve {}", seller.max_indifference_residual, seller.worst_reserve),
    );
    check(
        nature_report.min_certificate_slack >= -config.slack_tol,
        format!("certificate slack {:e}", nature_report.min_certificate_slack),
    );
    check(nature_report.max_support_gap <= tol, format!("support gap {:e}", nature_report.max_support_gap));
    for (i, &r) in mean_constraint_residuals.iter().enumerate() {
        check(r <= tol, format!("mean constraint of bidder {i} off by {r:e}"));
    }
    for (name, r) in [("H", mass.h), ("G*", mass.g), ("F*", mass.f)] {
        check(r <= tol, format!("mass of {name} off by {r:e}"));
    }
    check(h_mean_residual <= tol, format!("mean of H off by {h_mean_residual:e}"));
    if let ProjectionReport::Checked { max_support_deviation, min_random_gain, .. } = projection {
        check(max_support_deviation <= tol, format!("projection changes revenue on the support by {max_support_deviation:e}"));
        check(min_random_gain >= -config.slack_tol, format!("dropping inactive bidders raised revenue by {:e}", -min_random_gain));
    }
    let game_value_gap = match oracle {
        None => None,
        Some(Ok(gap)) => {
            let limit = config.oracle.map_or(0.0, |o| o.tolerance);
            check(gap <= limit, format!("LP game value differs from alpha by {gap:e}"));
            Some(gap)
        }
        Some(Err(e)) => {
            check(false, format!("LP oracle failed: {e}"));
            None
        }
    };

    Ok(VerificationReport {
        n: eq.n(),
        k: eq.k(),
        alpha,
        boundary_tie: eq.boundary_tie(),
        perturb_alpha: config.perturb_alpha,
        max_indifference_residual: seller.max_indifference_residual,
        min_certificate_slack: nature_report.min_certificate_slack,
        max_support_gap: nature_report.max_support_gap,
        mean_constraint_residuals,
        mass_residuals: mass,
        h_mean_residual,
        game_value_gap,
        seller,
        nature: nature_report,
        projection,
        passed: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(means: &[f64]) -> Equilibrium {
        compute_equilibrium(&AuctionInstance::new(means).unwrap()).unwrap()
    }

    #[test]
    fn seller_indifference_flagships() {
        for means in [vec![0.5, 0.5], vec![0.5; 10], vec![0.6, 0.5, 0.1], vec![0.5], vec![0.9, 0.01]] {
            let r = verify_seller_best_response(&eq(&means), 10_000).unwrap();
            assert!(r.max_indifference_residual <= 1e-10, "{means:?}: {r:?}");
        }
        assert_eq!(verify_seller_best_response(&eq(&[0.5, 0.5]), 1), Err(Error::GridTooSmall(1)));
    }

    #[test]
    fn certificate_dominates_and_touches() {
        for means in [vec![0.5, 0.5], vec![0.6, 0.5, 0.1], vec![0.5], vec![0.8, 0.7, 0.6, 0.5]] {
            let r = verify_nature_best_response(&eq(&means), 20_000, 7);
            assert!(r.min_certificate_slack >= -1e-10, "{means:?}: {r:?}");
            assert!(r.max_support_gap <= 1e-10, "{means:?}: {r:?}");
            assert!(r.all_zeros_slack > 0.0);
            assert!(r.all_ones_slack >= 0.0);
        }
    }

    #[test]
    fn single_bidder_has_no_top_two_region() {
        let r = verify_nature_best_response(&eq(&[0.5]), 1000, 1);
        assert_eq!(r.region_min_slack[0], None);
        assert!(r.region_min_slack[1].is_some());
    }

    #[test]
    fn projection() {
        assert_eq!(verify_k_projection(&eq(&[0.5, 0.5]), 100, 0), ProjectionReport::Skipped);
        match verify_k_projection(&eq(&[0.6, 0.5, 0.1]), 10_000, 0) {
            ProjectionReport::Checked { max_support_deviation, min_random_gain, strict_gains, .. } => {
                assert!(max_support_deviation <= 1e-12);
                assert!(min_random_gain >= -1e-12);
                assert!(strict_gains > 0);
            }
            ProjectionReport::Skipped => panic!("k < n"),
        }
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 4);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn full_pipeline_passes_and_perturbation_fails() {
        let cfg = VerifyConfig { samples: 20_000, ..VerifyConfig::default() };
        let inst = AuctionInstance::new(&[0.6, 0.5, 0.1]).unwrap();
        let r = run_full_verification(&inst, &cfg).unwrap();
        assert!(r.passed, "{:?}", r.failures);
        assert_eq!(r.k, 2);

        let bad = run_full_verification(&inst, &VerifyConfig { perturb_alpha: 0.01, ..cfg }).unwrap();
        assert!(!bad.passed);
        assert!((bad.max_indifference_residual - 0.01).abs() < 1e-3, "{}", bad.max_indifference_residual);
    }

    #[test]
    fn deterministic() {
        let cfg = VerifyConfig { samples: 10_000, seed: 42, ..VerifyConfig::default() };
        let inst = AuctionInstance::symmetric(3, 0.4).unwrap();
        assert_eq!(run_full_verification(&inst, &cfg).unwrap(), run_full_verification(&inst, &cfg).unwrap());
    }
}
