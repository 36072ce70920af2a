//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails without a confirmed explanation.
//!
//! Run alone with `cargo test -p tree-kaczmarz-cli --test acceptance`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tree_kaczmarz::linalg::{
    distance, eigenvalues, norm, pseudo_solve, singular_values, ComplexScalar, Matrix, RowEquation,
    DEFAULT_RANK_TOL,
};
use tree_kaczmarz::oracles::{
    brute_force_iterate, verify_omega_limit, Example1Config, Example1Variant,
};
use tree_kaczmarz::robustness::{solve_with_errors, ErrorModel};
use tree_kaczmarz::solver::iterate;
use tree_kaczmarz::sor::{build_sor, iterate_via_sor, SorSetup};
use tree_kaczmarz::topology::{Edge, NodeId, TreeDescription, TreeTopology};
use tree_kaczmarz::{solve, SolverConfig, TreeSystem};
use tree_kaczmarz_cli::commands::example1_sweep;
use tree_kaczmarz_cli::experiment::{evaluate, instance, ExperimentConfig};
use tree_kaczmarz_cli::generate::MatrixKind;

type Criterion = (&'static str, Option<u64>, fn() -> Verdict);

/// Outcome of one criterion.
enum Verdict {
    Pass(String),
    Fail(String),
    /// Failed, with the failure independently confirmed as a property of the
    /// mathematics rather than of this code.
    ConfirmedFail(String),
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> (Verdict, Duration) {
    let t = Instant::now();
    let v = f();
    let dt = t.elapsed();
    let v = match (v, limit) {
        (Verdict::Pass(msg), Some(l)) if dt > l => Verdict::Fail(format!("{msg}; runtime {dt:?} over {l:?}")),
        (v, _) => v,
    };
    (v, dt)
}

fn check(cond: bool, msg: String) -> Verdict {
    if cond {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

// ---------------------------------------------------------------- generators

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> TreeTopology {
    let parents: Vec<usize> = (1..n).map(|c| rng.random_range(0..c)).collect();
    let weighted = rng.random_bool(0.5);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let mut sums = vec![0.0; n];
    for (i, &p) in parents.iter().enumerate() {
        sums[p] += raw[i + 1];
    }
    let edges = parents
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if weighted {
                Edge::weighted(p, i + 1, raw[i + 1] / sums[p])
            } else {
                Edge::new(p, i + 1)
            }
        })
        .collect();
    TreeTopology::new(&TreeDescription {
        node_count: n,
        root: NodeId(0),
        edges,
    })
    .unwrap()
}

struct Spec {
    nodes: usize,
    dim: usize,
    max_rows: usize,
    rank: Option<usize>,
    consistent: bool,
}

fn random_system(rng: &mut ChaCha8Rng, spec: &Spec) -> TreeSystem {
    let tree = random_tree(rng, spec.nodes);
    let basis: Option<Vec<Vec<f64>>> = spec.rank.map(|r| {
        (0..r)
            .map(|_| {
                let g: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = norm(&g);
                g.into_iter().map(|v| v / n).collect()
            })
            .collect()
    });
    let x: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let row = |rng: &mut ChaCha8Rng| loop {
        let a: Vec<f64> = match &basis {
            None => (0..spec.dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            Some(g) => g.iter().fold(vec![0.0; spec.dim], |mut acc, gk| {
                let c: f64 = rng.random_range(-1.0..1.0);
                acc.iter_mut().zip(gk).for_each(|(a, b)| *a += c * b);
                acc
            }),
        };
        if norm(&a) > 0.2 {
            break a;
        }
    };
    let eqs = (0..spec.nodes)
        .map(|_| {
            let k = rng.random_range(1..=spec.max_rows);
            (0..k)
                .map(|_| {
                    let a = row(rng);
                    let mut b: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
                    if !spec.consistent {
                        b += rng.random_range(-1.0..1.0);
                    }
                    RowEquation::new(a, b).unwrap()
                })
                .collect()
        })
        .collect();
    TreeSystem::new(tree, eqs).unwrap()
}

fn random_spec(rng: &mut ChaCha8Rng, max_nodes: usize, max_dim: usize, consistent: bool) -> Spec {
    let dim = rng.random_range(1..=max_dim);
    Spec {
        nodes: rng.random_range(1..=max_nodes),
        dim,
        max_rows: rng.random_range(1..=2),
        rank: rng.random_bool(0.3).then(|| rng.random_range(1..=dim)),
        consistent,
    }
}

fn unique_system(rng: &mut ChaCha8Rng, n: usize) -> TreeSystem {
    loop {
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let sv = singular_values(&a);
        if sv[n - 1] > 0.1 * sv[0] {
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            return TreeSystem::one_row_per_node(random_tree(rng, n), &a, &b).unwrap();
        }
    }
}

/// Iterations for `ρⁿ` to fall below `target`.
fn iterations_for(rho: f64, target: f64) -> usize {
    (target.ln() / rho.max(1e-3).ln()).ceil() as usize
}

// ---------------------------------------------------------------- criteria

fn c1_example1_closed_forms() -> Verdict {
    let std_cfg = Example1Config::new(FRAC_PI_3, Example1Variant::Standard).unwrap();
    let avg_cfg = Example1Config::new(FRAC_PI_3, Example1Variant::Averaged).unwrap();
    let s = example1_sweep(&std_cfg, 4.0, 0.005).unwrap();
    let a = example1_sweep(&avg_cfg, 4.0, 0.005).unwrap();
    let a_limit = a.omega_limit.unwrap_or(f64::NAN);
    let ok = (s.omega_opt - 1.0718).abs() <= 1e-3
        && (s.rho_opt - 0.0718).abs() <= 1e-3
        && (a.omega_opt - 2.0).abs() <= 1e-3
        && (a.rho_opt - 0.5).abs() <= 1e-6
        && (a_limit - 8.0 / 3.0).abs() <= 1e-3;
    check(
        ok,
        format!(
            "standard omega_opt {:.6} rho_opt {:.6}; averaged omega_opt {:.6} rho_opt {:.9} Omega {:.6}",
            s.omega_opt, s.rho_opt, a.omega_opt, a.rho_opt, a_limit
        ),
    )
}

fn matched_gap(num: &[ComplexScalar], ana: &[ComplexScalar; 2]) -> f64 {
    let d = |p: ComplexScalar, q: ComplexScalar| (p - q).norm();
    let straight = d(num[0], ana[0]).max(d(num[1], ana[1]));
    let swapped = d(num[0], ana[1]).max(d(num[1], ana[0]));
    straight.min(swapped)
}

fn c2_eigenvalue_formulas() -> Verdict {
    let mut worst = 0.0f64;
    let mut points = 0;
    for alpha in [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2] {
        for variant in [Example1Variant::Standard, Example1Variant::Averaged] {
            let cfg = Example1Config::new(alpha, variant).unwrap();
            for k in 1..=200 {
                let w = k as f64 / 100.0;
                let num = eigenvalues(&cfg.matrix(w)).unwrap();
                worst = worst.max(matched_gap(&num, &cfg.eigenvalues(w)));
                points += 1;
            }
        }
    }
    check(worst <= 1e-10, format!("{points} points, worst gap {worst:.2e}"))
}

fn c3_three_way_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let consistent = rng.random_bool(0.5);
        let spec = random_spec(&mut rng, 8, 6, consistent);
        let sys = random_system(&mut rng, &spec);
        let omega = rng.random_range(0.01..1.99);
        let x: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = iterate(&sys, omega, &x).unwrap();
        let b = iterate_via_sor(&build_sor(&sys, omega).unwrap(), &x).unwrap();
        let c = brute_force_iterate(&sys, omega, &x).unwrap();
        let scale = 1.0 + norm(&x);
        worst = worst.max(distance(&a, &b).max(distance(&a, &c)).max(distance(&b, &c)) / scale);
    }
    check(worst <= 1e-11, format!("200 instances, worst relative gap {worst:.2e}"))
}

fn c4_restricted_radius_below_one() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut deficient = 0;
    for _ in 0..100 {
        let consistent = rng.random_bool(0.5);
        let spec = random_spec(&mut rng, 8, 6, consistent);
        let sys = random_system(&mut rng, &spec);
        let setup = SorSetup::new(&sys).unwrap();
        if setup.rank() < spec.dim {
            deficient += 1;
        }
        for w in [0.1, 0.5, 1.0, 1.5, 1.9] {
            worst = worst.max(setup.restricted_radius(w).unwrap());
        }
    }
    check(
        worst < 1.0 && deficient > 0,
        format!("100 systems ({deficient} rank-deficient), largest rho {worst:.9}"),
    )
}

fn c5_consistent_limits() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_mn, mut worst_spread) = (0.0f64, 0.0f64);
    let mut under = 0;
    for i in 0..50 {
        let mut spec = random_spec(&mut rng, 6, 5, true);
        if i % 3 == 0 {
            // fewer rows than unknowns
            spec.dim = rng.random_range(3..=5);
            spec.nodes = rng.random_range(1..spec.dim);
            spec.max_rows = 1;
            spec.rank = None;
        }
        let sys = random_system(&mut rng, &spec);
        if sys.total_rows() < sys.dimension() {
            under += 1;
        }
        let (a, b, _) = sys.stacked();
        let xm = pseudo_solve(&a, &b, DEFAULT_RANK_TOL).unwrap();
        let setup = SorSetup::new(&sys).unwrap();
        let mut limits = Vec::new();
        for w in [0.5, 1.0, 1.5] {
            let n = iterations_for(setup.restricted_radius(w).unwrap(), 1e-13) + 50;
            let cfg = SolverConfig::new(w).with_tolerance(0.0).with_max_iterations(n);
            let x = solve(&sys, &cfg).unwrap().solution;
            worst_mn = worst_mn.max(distance(&x, &xm));
            limits.push(x);
        }
        for p in &limits {
            for q in &limits {
                worst_spread = worst_spread.max(distance(p, q));
            }
        }
    }
    check(
        worst_mn <= 1e-7 && worst_spread <= 1e-7 && under > 0,
        format!(
            "50 systems ({under} underdetermined): worst distance to pseudo-inverse solution {worst_mn:.2e}, worst spread over omega {worst_spread:.2e}"
        ),
    )
}

fn c6_inconsistent_limits() -> Verdict {
    let row = |b: f64| vec![RowEquation::new(vec![1.0], b).unwrap()];
    let chain = TreeSystem::new(TreeTopology::chain(2).unwrap(), vec![row(0.0), row(1.0)]).unwrap();
    let mut worst = 0.0f64;
    for w in [0.25, 0.5, 1.0, 1.5] {
        let rho = (1.0f64 - w).powi(2);
        let n = iterations_for(rho, 1e-14) + 20;
        let x = solve(&chain, &SolverConfig::new(w).with_tolerance(0.0).with_max_iterations(n))
            .unwrap()
            .solution;
        worst = worst.max((x[0] - 1.0 / (2.0 - w)).abs());
    }
    let omegas = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];
    let rep = verify_omega_limit(&chain, &omegas).unwrap();
    let chain_ok = worst <= 1e-9
        && (rep.weighted_ls[0] - 0.5).abs() <= 1e-12
        && rep.slope.is_some_and(|s| s >= 0.9);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut min_slope = f64::INFINITY;
    let mut all_linear = true;
    for _ in 0..20 {
        let dim = rng.random_range(1..=4);
        let spec = Spec {
            nodes: rng.random_range(2..=6),
            dim,
            max_rows: 2,
            rank: None,
            consistent: false,
        };
        let sys = random_system(&mut rng, &spec);
        let r = verify_omega_limit(&sys, &omegas).unwrap();
        all_linear &= r.linear;
        if let Some(s) = r.slope {
            min_slope = min_slope.min(s);
        }
    }
    check(
        chain_ok && all_linear && min_slope >= 0.9,
        format!(
            "chain: worst |x - 1/(2-omega)| {worst:.2e}, x_LS {}, slope {:.4}; 20 random systems: smallest slope {min_slope:.4}",
            rep.weighted_ls[0],
            rep.slope.unwrap_or(f64::NAN)
        ),
    )
}

fn c7_error_stability() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_ratio = 0.0f64;
    for trial in 0..20 {
        let n = rng.random_range(3..=6);
        let sys = unique_system(&mut rng, n);
        let omega = rng.random_range(0.5..1.5);
        let rho = SorSetup::new(&sys).unwrap().restricted_radius(omega).unwrap();
        let iters = (iterations_for(rho, 1e-12) * 4 / 3).max(400);
        let cfg = SolverConfig::new(omega).with_tolerance(0.0).with_max_iterations(iters);
        let (_, rep) = solve_with_errors(&sys, &cfg, &ErrorModel::uniform(1e-3, 700 + trial)).unwrap();
        match (rep.limsup, rep.bound) {
            (Some(l), Some(b)) => worst_ratio = worst_ratio.max(l / b),
            _ => return Verdict::Fail(format!("trial {trial}: no bound for a unique-solution system")),
        }
    }
    check(
        worst_ratio <= 1.0,
        format!("20 trials, largest limsup / bound {worst_ratio:.4}"),
    )
}

/// Whether the iteration itself contracts at `omega`, checked with the
/// brute-force oracle rather than the spectral radius.
fn iteration_converges(sys: &TreeSystem, x_true: &[f64], omega: f64) -> bool {
    let mut x = vec![0.0; x_true.len()];
    for _ in 0..20_000 {
        x = brute_force_iterate(sys, omega, &x).unwrap();
        if !x.iter().all(|v| v.is_finite()) {
            return false;
        }
    }
    distance(&x, x_true) <= 1e-8
}

fn c8_experiment_properties() -> Verdict {
    let seed = 8;
    let cfg = ExperimentConfig::new(8, 20, seed);
    let mut above2 = 0;
    let mut counterexamples = Vec::new();
    let mut unconfirmed = Vec::new();
    for trial in 0..cfg.trials {
        let (g, _) = instance(&cfg, MatrixKind::Normal, trial).unwrap();
        let d = evaluate(&g.system, &g.x_true, 8.0, 0.005).unwrap();
        if d.omega_opt > 2.0 {
            above2 += 1;
        }
        if d.rho_opt >= 1.0 {
            unconfirmed.push(format!("trial {trial}: rho_opt {}", d.rho_opt));
        }
        let limit = d.omega_limit.unwrap_or(f64::NAN);
        if d.capped || limit.is_nan() || limit > 4.0 {
            // confirm by running the iteration just below the measured limit
            let probe = 0.5 * (4.0 + limit.min(8.0));
            if iteration_converges(&g.system, &g.x_true, probe) {
                counterexamples.push(format!("#{trial} Omega {limit:.4}"));
            } else {
                unconfirmed.push(format!("#{trial} Omega {limit:.4} not reproduced at {probe:.4}"));
            }
        }
    }

    let small = ExperimentConfig::new(3, 20, seed);
    let mut worst_e10 = 0.0f64;
    for trial in 0..small.trials {
        let (g, chain) = instance(&small, MatrixKind::AlmostOrthogonal, trial).unwrap();
        worst_e10 = worst_e10.max(evaluate(&chain, &g.x_true, 4.0, 0.005).unwrap().e10);
    }

    let msg = format!(
        "seed {seed}: distributed omega_opt > 2 in {above2}/20; Omega > 4 in {} ({}); size-3 almost-orthogonal standard e10 max {worst_e10:.2e}",
        counterexamples.len(),
        if counterexamples.is_empty() { "none".to_string() } else { counterexamples.join(", ") },
    );
    let rest_ok = above2 > 10 && worst_e10 <= 1e-6 && unconfirmed.is_empty();
    match (rest_ok, counterexamples.is_empty()) {
        (true, true) => Verdict::Pass(msg),
        (true, false) => Verdict::ConfirmedFail(format!(
            "{msg}; Omega <= 4 does not hold, confirmed by direct iteration above omega = 4"
        )),
        (false, _) => Verdict::Fail(format!("{msg}; unconfirmed: {}", unconfirmed.join(", "))),
    }
}

fn c9_weight_bookkeeping() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=60);
        let t = random_tree(&mut rng, n);
        let sum: f64 = t.leaf_weights().iter().map(|(_, w)| w).sum();
        let root = t.node_cumulative_weight(t.root()).unwrap();
        worst = worst.max((sum - 1.0).abs()).max((root - 1.0).abs());
    }
    check(worst <= 1e-12, format!("1000 trees, worst deviation from 1: {worst:.2e}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("two-line example optima", Some(1), c1_example1_closed_forms),
        ("two-line example eigenvalues", Some(1), c2_eigenvalue_formulas),
        ("three-way operator equivalence", Some(10), c3_three_way_equivalence),
        ("restricted spectral radius below one", Some(30), c4_restricted_radius_below_one),
        ("consistent-system limits", None, c5_consistent_limits),
        ("inconsistent-system limit law", None, c6_inconsistent_limits),
        ("error stability bound", Some(30), c7_error_stability),
        ("random-matrix experiment properties", None, c8_experiment_properties),
        ("leaf and cumulative weights", Some(5), c9_weight_bookkeeping),
    ];
    let mut hard_failures = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let (verdict, dt) = timed(limit.map(Duration::from_secs), f);
        let (tag, msg) = match verdict {
            Verdict::Pass(m) => ("PASS", m),
            Verdict::Fail(m) => {
                hard_failures += 1;
                ("FAIL", m)
            }
            Verdict::ConfirmedFail(m) => ("FAIL", m),
        };
        println!("criterion {} [{tag}] {name}: {msg} ({:.2}s)", i + 1, dt.as_secs_f64());
    }
    if hard_failures > 0 {
        eprintln!("{hard_failures} criterion/criteria failed");
        std::process::exit(1);
    }
}
