//! Brute-force check of the analytic equilibrium: the seller/nature game is
//! discretized on value and reserve grids and solved as a single linear
//! program, which yields the game value, the seller's mixture and the
//! discrete analogue of the affine certificate.

pub mod lp;

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{compute_equilibrium, AuctionInstance};
use crate::error::{Error, Result};
use lp::{LinearProgram, Relation, Sense};

/// Largest bidder count the oracle accepts.
pub const MAX_BIDDERS: usize = 3;

/// Largest number of grid profiles (LP columns) the dense solver is asked to handle.
pub const MAX_PROFILES: usize = 40_000;

/// Probabilities below this are treated as zero when reporting distributions.
const MASS_TOL: f64 = 1e-12;

/// Revenue of one second-price auction: `max{v₂, p}` if `v₁ > p`, else 0.
fn auction_payoff(values: &[f64], reserve: f64) -> f64 {
    let (mut v1, mut v2) = (f64::NEG_INFINITY, 0.0_f64);
    for &v in values {
        if v > v1 {
            v2 = v1.max(0.0);
            v1 = v;
        } else if v > v2 {
            v2 = v;
        }
    }
    if v1 > reserve {
        v2.max(reserve)
    } else {
        0.0
    }
}

fn grid(size: usize, extra: Option<f64>) -> Vec<f64> {
    let mut g: Vec<f64> = (0..size).map(|i| i as f64 / (size - 1) as f64).collect();
    if let Some(x) = extra {
        if g.iter().all(|&v| (v - x).abs() > 1e-12) {
            g.push(x);
            g.sort_by(f64::total_cmp);
        }
    }
    g
}

/// The game restricted to grid value profiles and grid reserves.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedGame {
    n: usize,
    means: Vec<f64>,
    alpha: f64,
    value_grid: Vec<f64>,
    reserve_grid: Vec<f64>,
    /// `num_profiles × n`, row-major, last bidder varies fastest.
    profiles: Vec<f64>,
    /// `num_profiles × num_reserves`, row-major.
    payoff: Vec<f64>,
}

impl DiscretizedGame {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Means in original bidder order.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Analytic `α` of the instance.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value_grid(&self) -> &[f64] {
        &self.value_grid
    }

    pub fn reserve_grid(&self) -> &[f64] {
        &self.reserve_grid
    }

    pub fn num_profiles(&self) -> usize {
        self.profiles.len() / self.n
    }

    pub fn num_reserves(&self) -> usize {
        self.reserve_grid.len()
    }

    pub fn profile(&self, i: usize) -> &[f64] {
        &self.profiles[i * self.n..(i + 1) * self.n]
    }

    pub fn payoff(&self, profile: usize, reserve: usize) -> f64 {
        self.payoff[profile * self.num_reserves() + reserve]
    }

    fn payoff_row(&self, profile: usize) -> &[f64] {
        let r = self.num_reserves();
        &self.payoff[profile * r..(profile + 1) * r]
    }

    /// Expected payoff of every profile against a seller mixture.
    pub fn expected_payoffs(&self, mixture: &[f64]) -> Vec<f64> {
        (0..self.num_profiles())
            .map(|i| self.payoff_row(i).iter().zip(mixture).map(|(a, w)| a * w).sum())
            .collect()
    }

    /// Payoff of every reserve against a distribution over profiles.
    pub fn reserve_payoffs(&self, nature: &[(usize, f64)]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_reserves()];
        for &(i, p) in nature {
            for (o, a) in out.iter_mut().zip(self.payoff_row(i)) {
                *o += p * a;
            }
        }
        out
    }
}

/// Grids of the given sizes with `α` injected into both.
pub fn build_game(
    instance: &AuctionInstance,
    value_grid_size: usize,
    reserve_grid_size: usize,
) -> Result<DiscretizedGame> {
    build_game_with(instance, value_grid_size, reserve_grid_size, true)
}

/// Like [`build_game`], optionally without adding `α` to the grids.
pub fn build_game_with(
    instance: &AuctionInstance,
    value_grid_size: usize,
    reserve_grid_size: usize,
    inject_alpha: bool,
) -> Result<DiscretizedGame> {
    let n = instance.n();
    if n > MAX_BIDDERS {
        return Err(Error::TooManyBidders { max: MAX_BIDDERS, actual: n });
    }
    for size in [value_grid_size, reserve_grid_size] {
        if size < 2 {
            return Err(Error::GridTooSmall(size));
        }
    }
    let alpha = compute_equilibrium(instance)?.alpha();
    let extra = inject_alpha.then_some(alpha);
    let value_grid = grid(value_grid_size, extra);
    let reserve_grid = grid(reserve_grid_size, extra);

    let g = value_grid.len();
    let num_profiles = g.checked_pow(n as u32).unwrap_or(usize::MAX);
    if num_profiles > MAX_PROFILES {
        return Err(Error::GameTooLarge { profiles: num_profiles, limit: MAX_PROFILES });
    }

    let mut profiles = vec![0.0; num_profiles * n];
    for (i, chunk) in profiles.chunks_mut(n).enumerate() {
        let mut rest = i;
        for slot in chunk.iter_mut().rev() {
            *slot = value_grid[rest % g];
            rest /= g;
        }
    }

    let r = reserve_grid.len();
    let mut payoff = vec![0.0; num_profiles * r];
    payoff
        .par_chunks_mut(r)
        .zip(profiles.par_chunks(n))
        .for_each(|(row, values)| {
            for (cell, &p) in row.iter_mut().zip(&reserve_grid) {
                *cell = auction_payoff(values, p);
            }
        });

    Ok(DiscretizedGame {
        n,
        means: instance.means(),
        alpha,
        value_grid,
        reserve_grid,
        profiles,
        payoff,
    })
}

/// Nature's optimal grid distribution against a fixed seller mixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NatureResponse {
    /// `(profile index, probability)` for profiles with positive mass.
    pub distribution: Vec<(usize, f64)>,
    pub value: f64,
}

/// Minimizes expected revenue over grid distributions whose marginal means
/// match the instance.
pub fn nature_best_response(game: &DiscretizedGame, seller_mixture: &[f64]) -> Result<NatureResponse> {
    if seller_mixture.len() != game.num_reserves()
        || seller_mixture.iter().any(|&w| w < 0.0 || !w.is_finite())
        || (seller_mixture.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidMixture);
    }
    let costs = game.expected_payoffs(seller_mixture);
    let mut program = LinearProgram::new(Sense::Minimize, costs);
    add_nature_constraints(&mut program, game, 0);
    let sol = program.solve()?;
    Ok(NatureResponse {
        distribution: positive_mass(&sol.x[..game.num_profiles()]),
        value: sol.objective,
    })
}

/// Mean-equality and normalization rows over the profile columns, which
/// start at column `offset`.
fn add_nature_constraints(program: &mut LinearProgram, game: &DiscretizedGame, offset: usize) {
    let cols = program.num_vars();
    let p = game.num_profiles();
    for bidder in 0..game.n() {
        let mut row = vec![0.0; cols];
        for i in 0..p {
            row[offset + i] = game.profile(i)[bidder];
        }
        program.constraint(row, Relation::Eq, game.means()[bidder]);
    }
    let mut row = vec![0.0; cols];
    row[offset..offset + p].fill(1.0);
    program.constraint(row, Relation::Eq, 1.0);
}

fn positive_mass(x: &[f64]) -> Vec<(usize, f64)> {
    x.iter()
        .enumerate()
        .filter(|&(_, &p)| p > MASS_TOL)
        .map(|(i, &p)| (i, p))
        .collect()
}

/// Optimal strategies and the dual affine certificate of the discrete game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LPSolution {
    pub game_value: f64,
    /// Weights over the reserve grid.
    pub seller_mixture: Vec<f64>,
    /// Certificate slopes, original bidder order.
    pub dual_gamma: Vec<f64>,
    /// Certificate intercept.
    pub dual_eta: f64,
    /// Nature's optimal grid distribution, `(profile index, probability)`.
    pub nature_distribution: Vec<(usize, f64)>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl LPSolution {
    /// `Σᵢ γᵢ·vᵢ + η`.
    pub fn certificate_at(&self, values: &[f64]) -> f64 {
        self.dual_gamma.iter().zip(values).map(|(g, v)| g * v).sum::<f64>() + self.dual_eta
    }
}

/// Solves the minimax LP
/// `max γ·m + η` over seller weights `w` (a probability vector), `γ` and `η`,
/// subject to `Σ_p w_p·payoff(v, p) ≥ γ·v + η` at every grid profile.
///
/// The solver works on the LP dual, nature's side (minimize `t` subject to
/// `E_F[payoff(·, p)] ≤ t` for every reserve, the mean equalities and
/// normalization), which has one row per reserve instead of one per profile.
/// Its row duals are exactly `(w, γ, η)`.
pub fn solve_minimax(game: &DiscretizedGame) -> Result<LPSolution> {
    let p = game.num_profiles();
    let r = game.num_reserves();
    // Columns: profile masses, then t (free).
    let t_col = p;
    let mut objective = vec![0.0; p + 1];
    objective[t_col] = 1.0;
    let mut program = LinearProgram::new(Sense::Minimize, objective);
    program.free_variable(t_col);
    for j in 0..r {
        let mut row = vec![0.0; p + 1];
        for (i, cell) in row.iter_mut().enumerate().take(p) {
            *cell = game.payoff(i, j);
        }
        row[t_col] = -1.0;
        program.constraint(row, Relation::Le, 0.0);
    }
    add_nature_constraints(&mut program, game, 0);
    let sol = program.solve()?;

    let seller_mixture = sol.duals[..r].iter().map(|&y| (-y).max(0.0)).collect();
    let dual_gamma = sol.duals[r..r + game.n()].to_vec();
    let dual_eta = sol.duals[r + game.n()];
    Ok(LPSolution {
        game_value: sol.objective,
        seller_mixture,
        dual_gamma,
        dual_eta,
        nature_distribution: positive_mass(&sol.x[..p]),
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_half() -> AuctionInstance {
        AuctionInstance::symmetric(2, 0.5).unwrap()
    }

    #[test]
    fn payoff_rule() {
        assert_eq!(auction_payoff(&[1.0, 1.0], 0.0), 1.0);
        assert_eq!(auction_payoff(&[0.4, 0.4], 0.4), 0.0);
        assert_eq!(auction_payoff(&[0.8, 0.3], 0.5), 0.5);
        assert_eq!(auction_payoff(&[0.8, 0.3], 0.9), 0.0);
        assert_eq!(auction_payoff(&[0.6], 0.2), 0.2);
        assert_eq!(auction_payoff(&[0.2, 0.9, 0.5], 0.1), 0.5);
    }

    #[test]
    fn cardinality() {
        let g = build_game_with(&half_half(), 51, 51, false).unwrap();
        assert_eq!(g.num_profiles(), 2601);
        assert_eq!(g.num_reserves(), 51);
        let g = build_game(&half_half(), 51, 51).unwrap();
        assert_eq!(g.num_profiles(), 52 * 52);
        assert_eq!(g.num_reserves(), 52);
        assert!(g.value_grid().contains(&g.alpha()));
        assert!(g.reserve_grid().contains(&g.alpha()));
        assert_eq!(g.value_grid()[0], 0.0);
        assert_eq!(*g.value_grid().last().unwrap(), 1.0);
    }

    #[test]
    fn payoff_cells() {
        let g = build_game_with(&half_half(), 11, 11, false).unwrap();
        let idx = |a: usize, b: usize| a * 11 + b;
        assert_eq!(g.profile(idx(10, 10)), &[1.0, 1.0]);
        assert_eq!(g.payoff(idx(10, 10), 0), 1.0);
        for p in 0..11 {
            assert_eq!(g.payoff(idx(p, p), p), 0.0);
        }
        assert!(g.payoff.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }

    #[test]
    fn guards() {
        let four = AuctionInstance::symmetric(4, 0.5).unwrap();
        assert!(matches!(build_game(&four, 5, 5), Err(Error::TooManyBidders { .. })));
        assert!(matches!(build_game(&half_half(), 1, 5), Err(Error::GridTooSmall(1))));
        let three = AuctionInstance::symmetric(3, 0.5).unwrap();
        assert!(matches!(build_game(&three, 101, 11), Err(Error::GameTooLarge { .. })));
    }

    #[test]
    fn zero_reserve_lets_nature_kill_revenue() {
        let g = build_game(&half_half(), 11, 11).unwrap();
        let mut w = vec![0.0; g.num_reserves()];
        w[0] = 1.0;
        let resp = nature_best_response(&g, &w).unwrap();
        assert!(resp.value.abs() < 1e-12);
        let mass: f64 = resp.distribution.iter().map(|&(_, p)| p).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corner_grid_against_zero_reserve() {
        // Grid {0, 1} only: nature mixes (0,0), (0,1), (1,0), (1,1) with
        // marginal means 1/2. Against the zero reserve only (1,1) pays 1,
        // and (1,0)/(0,1) with mass 1/2 each sets it to zero.
        let g = build_game_with(&half_half(), 2, 2, false).unwrap();
        let resp = nature_best_response(&g, &[1.0, 0.0]).unwrap();
        assert!(resp.value.abs() < 1e-12);
        // Against reserve 1 nothing ever sells.
        let resp = nature_best_response(&g, &[0.0, 1.0]).unwrap();
        assert!(resp.value.abs() < 1e-12);
        // The minimax value of the corner game is therefore 0.
        let sol = solve_minimax(&g).unwrap();
        assert!(sol.game_value.abs() < 1e-12);
    }

    #[test]
    fn invalid_mixture() {
        let g = build_game(&half_half(), 5, 5).unwrap();
        assert_eq!(nature_best_response(&g, &[1.0]), Err(Error::InvalidMixture));
        let w = vec![0.5; g.num_reserves()];
        assert_eq!(nature_best_response(&g, &w), Err(Error::InvalidMixture));
    }
}
