//! One function per subcommand.

use std::io;

use serde::Serialize;
use thiserror::Error;

use robust_reserve::distributions::WorstCaseDist;
use robust_reserve::game_oracle::{build_game, solve_minimax, LPSolution};
use robust_reserve::revenue::certificate;
use robust_reserve::simulate::{
    asymptotic_sweep, estimate_psi, floor_test, monte_carlo_sweep, write_sweep_csv, CandidateEstimate, Estimate,
    SimConfig, SweepRow,
};
use robust_reserve::verify::{run_full_verification, OracleConfig, VerificationReport};
use robust_reserve::{compute_equilibrium, AffineCertificate, AuctionInstance, Equilibrium, ReserveDist, VerifyConfig};

use crate::config::{CommandKind, ConfigError, RunConfig};
use crate::output::{json_string, Plot, Series, Writer, PALETTE};
use crate::Status;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] robust_reserve::Error),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
}

pub fn run(cfg: &RunConfig) -> Result<Status, CliError> {
    match cfg.command {
        CommandKind::Equilibrium => cmd_equilibrium(cfg),
        CommandKind::Verify => cmd_verify(cfg),
        CommandKind::Oracle => cmd_oracle(cfg),
        CommandKind::Simulate => cmd_simulate(cfg),
        CommandKind::Sweep => cmd_sweep(cfg),
    }
}

fn instance(cfg: &RunConfig) -> Result<AuctionInstance, CliError> {
    let means = cfg.means.as_deref().expect("resolved config of a non-sweep command has means");
    Ok(AuctionInstance::new(means)?)
}

fn sim_config(cfg: &RunConfig, trials: u64) -> Result<SimConfig, CliError> {
    Ok(SimConfig::new(trials, cfg.seed, cfg.streams)?)
}

/// Prints the JSON document with `--json`, the summary line otherwise.
fn report(cfg: &RunConfig, json: &str, summary: &str) {
    if cfg.json {
        println!("{json}");
    } else {
        println!("{summary}");
    }
}

#[derive(Serialize)]
struct EquilibriumOut {
    n: usize,
    k: usize,
    alpha: f64,
    mbar_k: f64,
    revenue: f64,
    /// Selection weights of the active bidders, descending mean.
    thetas: Vec<f64>,
    active_bidders: Vec<usize>,
    inactive_bidders: Vec<usize>,
    boundary_tie: bool,
    reserve_atom_at_zero: f64,
    certificate: AffineCertificate,
}

impl EquilibriumOut {
    fn new(eq: &Equilibrium) -> Self {
        Self {
            n: eq.n(),
            k: eq.k(),
            alpha: eq.alpha(),
            mbar_k: eq.active().mbar_k,
            revenue: eq.revenue(),
            thetas: eq.thetas().to_vec(),
            active_bidders: eq.active_bidders().iter().map(|b| b.index).collect(),
            inactive_bidders: eq.inactive_bidders().iter().map(|b| b.index).collect(),
            boundary_tie: eq.boundary_tie(),
            reserve_atom_at_zero: ReserveDist::for_equilibrium(eq).atom_at_zero(),
            certificate: certificate(eq),
        }
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",")
}

fn cmd_equilibrium(cfg: &RunConfig) -> Result<Status, CliError> {
    let eq = compute_equilibrium(&instance(cfg)?)?;
    let hash = cfg.hash();
    let mut w = Writer::new(&cfg.out, &hash)?;
    let body = EquilibriumOut::new(&eq);
    let json = w.json("equilibrium.json", &body)?;
    w.text("distribution.txt", &WorstCaseDist::new(&eq).record().to_string())?;
    let summary = format!(
        "k={} alpha={:.6} revenue={:.6} thetas={}{}",
        eq.k(),
        eq.alpha(),
        eq.revenue(),
        fmt_list(eq.thetas()),
        if eq.boundary_tie() { " (a mean ties alpha)" } else { "" }
    );
    report(cfg, &json, &summary);
    Ok(Status::Pass)
}

fn cmd_verify(cfg: &RunConfig) -> Result<Status, CliError> {
    let inst = instance(cfg)?;
    let vc = VerifyConfig {
        grid_size: cfg.grid,
        samples: cfg.samples,
        support_samples: cfg.support_samples,
        seed: cfg.seed,
        analytic_tol: cfg.analytic_tol,
        slack_tol: cfg.slack_tol,
        oracle: cfg.oracle.then_some(OracleConfig {
            value_grid: cfg.oracle_grid,
            reserve_grid: cfg.oracle_grid,
            ..OracleConfig::default()
        }),
        perturb_alpha: cfg.perturb_alpha,
    };
    let r: VerificationReport = run_full_verification(&inst, &vc)?;
    let mut w = Writer::new(&cfg.out, &cfg.hash())?;
    let json = w.json("verification.json", &r)?;
    let summary = if r.passed {
        format!(
            "PASS k={} alpha={:.6} indifference={:.2e} slack={:.2e} support_gap={:.2e}{}",
            r.k,
            r.alpha,
            r.max_indifference_residual,
            r.min_certificate_slack,
            r.max_support_gap,
            r.game_value_gap.map(|g| format!(" lp_gap={g:.2e}")).unwrap_or_default()
        )
    } else {
        format!("FAIL {}", r.failures.join("; "))
    };
    report(cfg, &json, &summary);
    Ok(if r.passed { Status::Pass } else { Status::Fail })
}

#[derive(Serialize)]
struct SupportPoint {
    values: Vec<f64>,
    mass: f64,
}

#[derive(Serialize)]
struct OracleOut<'a> {
    n: usize,
    alpha: f64,
    value_grid_size: usize,
    reserve_grid_size: usize,
    value_gap: f64,
    analytic_certificate: AffineCertificate,
    #[serde(flatten)]
    solution: &'a LPSolution,
    nature_support: Vec<SupportPoint>,
}

fn cmd_oracle(cfg: &RunConfig) -> Result<Status, CliError> {
    let inst = instance(cfg)?;
    let eq = compute_equilibrium(&inst)?;
    let game = build_game(&inst, cfg.grid, cfg.reserve_grid)?;
    let sol = solve_minimax(&game)?;
    let body = OracleOut {
        n: game.n(),
        alpha: eq.alpha(),
        value_grid_size: game.value_grid().len(),
        reserve_grid_size: game.num_reserves(),
        value_gap: (sol.game_value - eq.alpha()).abs(),
        analytic_certificate: certificate(&eq),
        solution: &sol,
        nature_support: sol
            .nature_distribution
            .iter()
            .map(|&(i, mass)| SupportPoint { values: game.profile(i).to_vec(), mass })
            .collect(),
    };
    let mut w = Writer::new(&cfg.out, &cfg.hash())?;
    let json = w.json("oracle.json", &body)?;
    let summary = format!(
        "value={:.6} alpha={:.6} gap={:.2e} gamma={} eta={:.6} iterations={}",
        sol.game_value,
        eq.alpha(),
        body.value_gap,
        fmt_list(&sol.dual_gamma),
        sol.dual_eta,
        sol.iterations
    );
    report(cfg, &json, &summary);
    Ok(Status::Pass)
}

#[derive(Serialize)]
struct SimulateOut {
    n: usize,
    k: usize,
    alpha: f64,
    trials: u64,
    streams: usize,
    seed: u64,
    worst_case: Estimate,
    candidates: Vec<CandidateEstimate>,
    floor_holds: bool,
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Status, CliError> {
    let inst = instance(cfg)?;
    let eq = compute_equilibrium(&inst)?;
    let sc = sim_config(cfg, cfg.trials.unwrap_or(1_000_000))?;
    let g = ReserveDist::for_equilibrium(&eq);
    let worst_case = estimate_psi(&WorstCaseDist::new(&eq), &g, &sc);
    let candidates = floor_test(&inst, &sc)?;
    let floor_holds = candidates.iter().all(|c| c.above_floor);
    let body = SimulateOut {
        n: eq.n(),
        k: eq.k(),
        alpha: eq.alpha(),
        trials: sc.trials,
        streams: sc.parallel_streams,
        seed: sc.seed,
        worst_case,
        candidates,
        floor_holds,
    };

    let mut w = Writer::new(&cfg.out, &cfg.hash())?;
    let json = w.json("simulation.json", &body)?;
    let row = SweepRow {
        n: eq.n(),
        alpha_n: eq.alpha(),
        reserve_mass_above_zero: g.mass_above_zero(),
        revenue: worst_case.mean,
        stderr: Some(worst_case.std_error),
    };
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &[row])?;
    w.text("simulation.csv", &String::from_utf8(csv).expect("ascii csv"))?;
    let mut cand = String::from("candidate,mean,stderr,above_floor\n");
    for c in &body.candidates {
        cand.push_str(&format!("{},{:.17},{:.17e},{}\n", c.name, c.estimate.mean, c.estimate.std_error, c.above_floor));
    }
    w.text("candidates.csv", &cand)?;

    let lowest = body
        .candidates
        .iter()
        .min_by(|a, b| a.estimate.mean.total_cmp(&b.estimate.mean))
        .expect("battery is non-empty");
    let summary = format!(
        "{} psi={:.6}±{:.1e} alpha={:.6} lowest candidate {}={:.6}",
        if floor_holds { "PASS" } else { "FAIL" },
        worst_case.mean,
        worst_case.std_error,
        eq.alpha(),
        lowest.name,
        lowest.estimate.mean
    );
    report(cfg, &json, &summary);
    Ok(if floor_holds { Status::Pass } else { Status::Fail })
}

/// Step CDF with explicit left limits at the jump points.
fn cdf_points(f: impl Fn(f64) -> f64, jumps: &[f64], grid: usize) -> Vec<(f64, f64)> {
    let mut xs: Vec<f64> = (0..=grid).map(|i| i as f64 / grid as f64).chain(jumps.iter().copied()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut out = Vec::with_capacity(xs.len() + jumps.len());
    for x in xs {
        if jumps.contains(&x) {
            out.push((x, f(x - 1e-12)));
        }
        out.push((x, f(x)));
    }
    out
}

#[derive(Serialize)]
struct SweepOut {
    m: f64,
    monte_carlo: bool,
    rows: Vec<SweepRow>,
    alpha_increasing: bool,
    mass_decreasing: bool,
}

fn cmd_sweep(cfg: &RunConfig) -> Result<Status, CliError> {
    let m = cfg.m.expect("resolved sweep has m");
    let ns = cfg.n_range.as_deref().expect("resolved sweep has an n range");
    let rows = match cfg.trials {
        Some(t) => monte_carlo_sweep(m, ns, &sim_config(cfg, t)?)?,
        None => asymptotic_sweep(m, ns)?,
    };
    let mut w = Writer::new(&cfg.out, &cfg.hash())?;
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &rows)?;
    w.text("sweep.csv", &String::from_utf8(csv).expect("ascii csv"))?;

    let (n_min, n_max) = (*ns.iter().min().expect("non-empty"), *ns.iter().max().expect("non-empty"));
    let mut by_n = rows.clone();
    by_n.sort_by_key(|r| r.n);
    w.svg(
        "sweep.svg",
        &Plot {
            title: format!("m = {m}"),
            x_label: "n".into(),
            y_label: "value".into(),
            x_range: (n_min as f64, (n_max as f64).max(n_min as f64 + 1.0)),
            y_range: (0.0, 1.0),
            series: vec![
                Series { label: "alpha(n)".into(), points: by_n.iter().map(|r| (r.n as f64, r.alpha_n)).collect(), color: PALETTE[0] },
                Series {
                    label: "G*((0,1])".into(),
                    points: by_n.iter().map(|r| (r.n as f64, r.reserve_mass_above_zero)).collect(),
                    color: PALETTE[1],
                },
            ],
        },
    )?;

    // CDF overlays at the smallest and largest n.
    let mut cdf_csv = String::from("n,v,f_marginal,g_reserve\n");
    let mut series = Vec::new();
    let mut picks = vec![n_min];
    if n_max != n_min {
        picks.push(n_max);
    }
    for (i, &n) in picks.iter().enumerate() {
        let eq = compute_equilibrium(&AuctionInstance::symmetric(n, m)?)?;
        let f = WorstCaseDist::new(&eq);
        let g = ReserveDist::for_equilibrium(&eq);
        let jumps = [0.0, eq.alpha(), 1.0];
        let fp = cdf_points(|v| f.marginal_cdf(0, v), &jumps, 200);
        let gp = cdf_points(|v| g.cdf(v), &jumps, 200);
        for (a, b) in fp.iter().zip(&gp) {
            cdf_csv.push_str(&format!("{n},{:.17},{:.17},{:.17}\n", a.0, a.1, b.1));
        }
        series.push(Series { label: format!("F* marginal, n={n}"), points: fp, color: PALETTE[2 * i] });
        series.push(Series { label: format!("G*, n={n}"), points: gp, color: PALETTE[2 * i + 1] });
    }
    w.text("cdfs.csv", &cdf_csv)?;
    w.svg(
        "cdfs.svg",
        &Plot {
            title: format!("CDFs, m = {m}"),
            x_label: "value / reserve".into(),
            y_label: "CDF".into(),
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            series,
        },
    )?;

    let body = SweepOut {
        m,
        monte_carlo: cfg.trials.is_some(),
        alpha_increasing: by_n.windows(2).all(|p| p[0].alpha_n < p[1].alpha_n),
        mass_decreasing: by_n.windows(2).all(|p| p[0].reserve_mass_above_zero > p[1].reserve_mass_above_zero),
        rows,
    };
    let json = json_string(&body, &cfg.hash());
    let summary = format!(
        "{} rows, alpha {:.6} -> {:.6}, mass above zero {:.6} -> {:.6}; wrote {}",
        by_n.len(),
        by_n[0].alpha_n,
        by_n[by_n.len() - 1].alpha_n,
        by_n[0].reserve_mass_above_zero,
        by_n[by_n.len() - 1].reserve_mass_above_zero,
        w.written().iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
    );
    report(cfg, &json, &summary);
    Ok(Status::Pass)
}
