mod common;

use proptest::prelude::*;
use robust_reserve::game_oracle::lp::{LinearProgram, LpError, Relation, Sense};
use robust_reserve::game_oracle::{build_game, build_game_with, nature_best_response, solve_minimax, DiscretizedGame};
use robust_reserve::revenue::certificate;
use robust_reserve::{compute_equilibrium, AuctionInstance};

fn symmetric(n: usize, m: f64) -> AuctionInstance {
    AuctionInstance::symmetric(n, m).unwrap()
}

fn pure(game: &DiscretizedGame, j: usize) -> Vec<f64> {
    let mut w = vec![0.0; game.num_reserves()];
    w[j] = 1.0;
    w
}

#[test]
fn flagship_value_and_certificate() {
    let inst = symmetric(2, 0.5);
    let eq = compute_equilibrium(&inst).unwrap();
    let game = build_game(&inst, 101, 101).unwrap();
    let sol = solve_minimax(&game).unwrap();
    let alpha = eq.alpha();
    assert!((sol.game_value - alpha).abs() <= 0.01, "value {} vs {alpha}", sol.game_value);
    let cert = certificate(&eq);
    for &g in &sol.dual_gamma {
        assert!((g - cert.coeffs[0]).abs() <= 0.05, "gamma {g} vs {}", cert.coeffs[0]);
    }
    assert!((sol.dual_eta - cert.intercept).abs() <= 0.05, "eta {} vs {}", sol.dual_eta, cert.intercept);
    // The objective value equals γ·m + η.
    let dual_obj: f64 = sol.dual_gamma.iter().zip(game.means()).map(|(g, m)| g * m).sum::<f64>() + sol.dual_eta;
    assert!((dual_obj - sol.game_value).abs() < 1e-9);
    assert!(sol.primal_residual <= 1e-8 && sol.dual_residual <= 1e-8);
}

#[test]
fn seller_mixture_is_dual_feasible() {
    let game = build_game(&symmetric(2, 0.5), 51, 51).unwrap();
    let sol = solve_minimax(&game).unwrap();
    let total: f64 = sol.seller_mixture.iter().sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(sol.seller_mixture.iter().all(|&w| w >= 0.0));
    let expected = game.expected_payoffs(&sol.seller_mixture);
    for (i, e) in expected.iter().enumerate() {
        let l = sol.certificate_at(game.profile(i));
        assert!(*e >= l - 1e-9, "profile {i}: {e} < {l}");
    }
}

#[test]
fn complementary_slackness() {
    let game = build_game(&symmetric(2, 0.5), 51, 51).unwrap();
    let sol = solve_minimax(&game).unwrap();
    let expected = game.expected_payoffs(&sol.seller_mixture);
    for &(i, p) in &sol.nature_distribution {
        assert!(p > 0.0);
        let gap = (expected[i] - sol.certificate_at(game.profile(i))).abs();
        assert!(gap <= 1e-6, "profile {:?}: gap {gap}", game.profile(i));
    }
}

#[test]
fn single_buyer_matches_its_root() {
    let alpha = common::alpha_by_bisection(1, 0.5);
    let game = build_game(&symmetric(1, 0.5), 101, 101).unwrap();
    let sol = solve_minimax(&game).unwrap();
    assert!((sol.game_value - alpha).abs() <= 0.01, "{} vs {alpha}", sol.game_value);
}

#[test]
fn asymmetric_three_bidders() {
    let inst = AuctionInstance::new(&[0.6, 0.5, 0.1]).unwrap();
    let alpha = compute_equilibrium(&inst).unwrap().alpha();
    let game = build_game(&inst, 21, 21).unwrap();
    let sol = solve_minimax(&game).unwrap();
    // A coarse grid only restricts nature's support, so the value is at least α
    // up to reserve discretization.
    assert!((sol.game_value - alpha).abs() <= 0.05, "{} vs {alpha}", sol.game_value);
}

#[test]
fn weak_duality_sandwich() {
    let game = build_game(&symmetric(2, 0.5), 26, 26).unwrap();
    let value = solve_minimax(&game).unwrap().game_value;
    let pure_best = (0..game.num_reserves())
        .map(|j| nature_best_response(&game, &pure(&game, j)).unwrap().value)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(pure_best <= value + 1e-9, "{pure_best} > {value}");

    // Any mixture, including the analytic G* binned to the grid.
    let eq = compute_equilibrium(&symmetric(2, 0.5)).unwrap();
    let g = robust_reserve::ReserveDist::for_equilibrium(&eq);
    let grid = game.reserve_grid();
    let mut w = vec![0.0; grid.len()];
    for j in 0..grid.len() {
        let hi = if j + 1 < grid.len() { g.cdf(grid[j + 1]) } else { 1.0 };
        let lo = if j == 0 { 0.0 } else { g.cdf(grid[j]) };
        w[j] = (hi - lo).max(0.0);
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let resp = nature_best_response(&game, &w).unwrap();
    assert!(resp.value <= value + 1e-9);
    assert!((resp.value - eq.alpha()).abs() < 0.05, "{}", resp.value);

    // Nature's optimal law holds every pure reserve to at most the value.
    let sol = solve_minimax(&game).unwrap();
    let best_reply = game.reserve_payoffs(&sol.nature_distribution).into_iter().fold(f64::NEG_INFINITY, f64::max);
    assert!(best_reply >= value - 1e-9 && best_reply <= value + 1e-7, "{best_reply} vs {value}");
}

#[test]
fn grid_refinement_approaches_alpha() {
    let alpha = compute_equilibrium(&symmetric(2, 0.5)).unwrap().alpha();
    let errors: Vec<f64> = [26, 51, 101]
        .iter()
        .map(|&s| (solve_minimax(&build_game(&symmetric(2, 0.5), s, s).unwrap()).unwrap().game_value - alpha).abs())
        .collect();
    assert!(errors[0] >= errors[1] && errors[1] >= errors[2], "{errors:?}");
}

#[test]
fn injection_helps() {
    let inst = symmetric(2, 0.5);
    let alpha = compute_equilibrium(&inst).unwrap().alpha();
    let with = solve_minimax(&build_game(&inst, 26, 26).unwrap()).unwrap().game_value;
    let without = solve_minimax(&build_game_with(&inst, 26, 26, false).unwrap()).unwrap().game_value;
    assert!((with - alpha).abs() <= (without - alpha).abs() + 1e-12, "{with} {without} {alpha}");
}

#[test]
fn corner_game_by_hand() {
    // Profiles (0,0), (0,1), (1,0), (1,1) with means 1/2. Reserve 0 earns
    // only at (1,1); reserve 1 never sells. Nature puts 1/2 on each of
    // (0,1) and (1,0), so the value is 0 for every seller mixture.
    let game = build_game_with(&symmetric(2, 0.5), 2, 2, false).unwrap();
    let profiles: Vec<&[f64]> = (0..4).map(|i| game.profile(i)).collect();
    assert_eq!(profiles, vec![&[0.0, 0.0][..], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
    for w0 in [0.0, 0.3, 1.0] {
        let resp = nature_best_response(&game, &[w0, 1.0 - w0]).unwrap();
        assert!(resp.value.abs() < 1e-12);
    }
}

#[test]
fn lp_matrix_game_and_bounds() {
    let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
    lp.constraint(vec![1.0], Relation::Le, 1.0);
    assert!((lp.solve().unwrap().objective - 1.0).abs() < 1e-12);

    // Row player of [[1, 0], [0, 1]]: max v s.t. p₁ ≥ v, p₂ ≥ v, p₁ + p₂ = 1.
    let mut lp = LinearProgram::new(Sense::Maximize, vec![0.0, 0.0, 1.0]);
    lp.free_variable(2);
    lp.constraint(vec![1.0, 0.0, -1.0], Relation::Ge, 0.0);
    lp.constraint(vec![0.0, 1.0, -1.0], Relation::Ge, 0.0);
    lp.constraint(vec![1.0, 1.0, 0.0], Relation::Eq, 1.0);
    assert!((lp.solve().unwrap().objective - 0.5).abs() < 1e-12);

    let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
    lp.constraint(vec![1.0, -1.0], Relation::Le, 1.0);
    assert!(matches!(lp.solve(), Err(LpError::Unbounded { .. })));
}

fn random_lp() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<i8>, Vec<f64>, bool)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), m),
            prop::collection::vec(prop_oneof![Just(-1i8), Just(0), Just(1)], m),
            prop::collection::vec(-4.0..4.0f64, m),
            any::<bool>(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn simplex_matches_vertex_enumeration((c, a, rel, b, maximize) in random_lp()) {
        // A box keeps every instance bounded so the vertex optimum exists.
        let n = c.len();
        let mut a = a;
        let mut rel = rel;
        let mut b = b;
        for j in 0..n {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            a.push(row);
            rel.push(-1);
            b.push(10.0);
        }
        let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
        let mut lp = LinearProgram::new(sense, c.clone());
        for ((row, &r), &bi) in a.iter().zip(&rel).zip(&b) {
            let relation = match r { -1 => Relation::Le, 1 => Relation::Ge, _ => Relation::Eq };
            lp.constraint(row.clone(), relation, bi);
        }
        let oracle = common::vertex_enumeration(&c, &a, &rel, &b, maximize);
        match (lp.solve(), oracle) {
            (Ok(sol), Some(v)) => {
                prop_assert!((sol.objective - v).abs() <= 1e-8 * (1.0 + v.abs()), "simplex {} vs vertices {}", sol.objective, v);
                prop_assert!(sol.primal_residual <= 1e-8);
                prop_assert!(sol.dual_residual <= 1e-8);
            }
            (Err(LpError::Infeasible { .. }), None) => {}
            (got, want) => prop_assert!(false, "simplex {got:?} vs vertices {want:?}"),
        }
    }
}
