//! Standard vs distributed Kaczmarz on random square matrices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tree_kaczmarz::linalg::{distance, Vector};
use tree_kaczmarz::sor::{omega_sweep, DEFAULT_OMEGA_MAX, DEFAULT_SWEEP_STEP};
use tree_kaczmarz::{solve, SolverConfig, TreeSystem};

use crate::error::{CliError, Result};
use crate::generate::{generate_with, Generated, MatrixKind, TreeShape};
use crate::output::{Cell, Table};

/// Iterations behind the reported error.
pub const ERROR_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    /// 3 or 8.
    pub size: usize,
    pub trials: usize,
    pub seed: u64,
    pub omega_max: f64,
    pub step: f64,
}

impl ExperimentConfig {
    pub fn new(size: usize, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            size,
            trials,
            seed,
            omega_max: DEFAULT_OMEGA_MAX,
            step: DEFAULT_SWEEP_STEP,
        }
    }

    pub fn shape(&self) -> Result<TreeShape> {
        match self.size {
            3 => Ok(TreeShape::Fig3),
            8 => Ok(TreeShape::Fig8),
            n => Err(CliError::Usage(format!("experiment size must be 3 or 8, got {n}"))),
        }
    }
}

/// One variant on one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantResult {
    pub omega_opt: f64,
    pub rho_opt: f64,
    /// Ω, the end of the convergence range found by the sweep.
    pub omega_limit: Option<f64>,
    /// `ρ < 1` still held at the top of the searched range.
    pub capped: bool,
    /// `‖x₁₀ − x_true‖` from `x₀ = 0` at `omega_opt`.
    pub e10: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceResult {
    pub trial: usize,
    pub kind: MatrixKind,
    pub standard: VariantResult,
    pub distributed: VariantResult,
}

impl InstanceResult {
    /// Ω above 4 or not found below the cap.
    pub fn flagged(&self) -> bool {
        let d = &self.distributed;
        d.capped || d.omega_limit.is_some_and(|w| w > 4.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub instances: Vec<InstanceResult>,
}

/// Sweep for the optimum, then run ten iterations there from zero.
pub fn evaluate(system: &TreeSystem, x_true: &[f64], omega_max: f64, step: f64) -> Result<VariantResult> {
    let sweep = omega_sweep(system, omega_max, step)?;
    let e10 = error_after(system, x_true, sweep.omega_opt, ERROR_ITERATIONS)?;
    Ok(VariantResult {
        omega_opt: sweep.omega_opt,
        rho_opt: sweep.rho_opt,
        omega_limit: sweep.omega_limit,
        capped: sweep.capped,
        e10,
    })
}

/// `‖xₙ − x_true‖` after `n` iterations from zero.
pub fn error_after(system: &TreeSystem, x_true: &[f64], omega: f64, n: usize) -> Result<f64> {
    let cfg = SolverConfig::new(omega).with_tolerance(0.0).with_max_iterations(n);
    Ok(distance(&solve(system, &cfg)?.solution, x_true))
}

/// Generator for trial `trial` of `kind`: one ChaCha stream per pair.
pub fn instance_rng(seed: u64, kind: MatrixKind, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = MatrixKind::ALL.iter().position(|&m| m == kind).expect("listed") as u64;
    rng.set_stream((k << 32) | trial as u64);
    rng
}

/// The instance and its two systems: all rows on a chain, and the rows on
/// the experiment tree.
pub fn instance(cfg: &ExperimentConfig, kind: MatrixKind, trial: usize) -> Result<(Generated, TreeSystem)> {
    let mut rng = instance_rng(cfg.seed, kind, trial);
    let g = generate_with(&mut rng, kind, &cfg.shape()?, cfg.size)?;
    let chain = TreeSystem::chain(&g.matrix, &g.rhs)?;
    Ok((g, chain))
}

pub fn run_instance(cfg: &ExperimentConfig, kind: MatrixKind, trial: usize) -> Result<InstanceResult> {
    let (g, chain) = instance(cfg, kind, trial)?;
    Ok(InstanceResult {
        trial,
        kind,
        standard: evaluate(&chain, &g.x_true, cfg.omega_max, cfg.step)?,
        distributed: evaluate(&g.system, &g.x_true, cfg.omega_max, cfg.step)?,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.shape()?;
    let mut instances = Vec::new();
    for trial in 0..cfg.trials {
        for kind in MatrixKind::ALL {
            instances.push(run_instance(cfg, kind, trial)?);
        }
    }
    Ok(ExperimentReport {
        config: *cfg,
        instances,
    })
}

impl ExperimentReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "trial",
            "matrix",
            "standard_omega_opt",
            "standard_rho_opt",
            "standard_omega_limit",
            "standard_e10",
            "distributed_omega_opt",
            "distributed_rho_opt",
            "distributed_omega_limit",
            "distributed_e10",
            "flagged",
        ]);
        for r in &self.instances {
            let (s, d) = (&r.standard, &r.distributed);
            t.push(vec![
                r.trial.into(),
                r.kind.name().into(),
                s.omega_opt.into(),
                s.rho_opt.into(),
                limit_cell(s),
                s.e10.into(),
                d.omega_opt.into(),
                d.rho_opt.into(),
                limit_cell(d),
                d.e10.into(),
                r.flagged().into(),
            ]);
        }
        t
    }

    pub fn summary(&self) -> Vec<String> {
        let n = self.instances.len();
        let above2 = self.instances.iter().filter(|r| r.distributed.omega_opt > 2.0).count();
        let flagged: Vec<String> = self
            .instances
            .iter()
            .filter(|r| r.flagged())
            .map(|r| format!("{}#{}", r.kind.name(), r.trial))
            .collect();
        let mut lines = vec![
            format!(
                "size {} seed {} trials {}: e0 = 1, e10 after {} iterations at the numerical optimum",
                self.config.size, self.config.seed, self.config.trials, ERROR_ITERATIONS
            ),
            format!("distributed omega_opt > 2 in {above2} of {n} instances"),
        ];
        if flagged.is_empty() {
            lines.push(format!("distributed Omega <= 4 in every instance (grid up to {})", self.config.omega_max));
        } else {
            lines.push(format!("FLAG: distributed Omega not below 4 for {}", flagged.join(", ")));
        }
        lines
    }
}

fn limit_cell(v: &VariantResult) -> Cell {
    match v.omega_limit {
        Some(w) if v.capped => Cell::Text(format!(">={w}")),
        other => other.into(),
    }
}

/// `x_true` norm, for checking the `e₀ = 1` normalization.
pub fn initial_error(x_true: &Vector) -> f64 {
    tree_kaczmarz::linalg::norm(x_true)
}
