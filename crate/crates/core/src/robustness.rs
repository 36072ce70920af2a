//! Additive transmission errors and the resulting stability bound.
//!
//! Every estimate a non-leaf node sends down (`ε`) and every estimate a
//! non-root node sends up (`δ`) may be perturbed by a vector of norm at most
//! `M`. With a unique solution and `ρ = ρ(B̂^ω) < 1` the iterates stay within
//! `2KM / (1 − ρ)` of `x(ω)` asymptotically, where `K` is twice the tree depth.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{distance, norm, Vector};
use crate::solver::{solve_hooked, Message, SolveResult, SolverConfig, Stage, TraceLevel, TreeSystem};
use crate::sor::{fixed_point, SorSetup, UNIT_RADIUS_TOL};
use crate::topology::{NodeId, TreeTopology};

/// Fraction of the run, counted from the end, over which the limsup is taken.
pub const LIMSUP_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub enum ErrorDistribution {
    /// Independent draws, uniform in the ball of radius `M`.
    UniformBall,
    /// The same vector on every perturbed message.
    FixedVector(Vector),
    /// Fixed vectors per sending node; nodes not listed send clean messages.
    PerNodeTable {
        dispersion: BTreeMap<NodeId, Vector>,
        pooling: BTreeMap<NodeId, Vector>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorStages {
    Dispersion,
    Pooling,
    #[default]
    Both,
}

impl ErrorStages {
    fn includes(self, stage: Stage) -> bool {
        matches!(
            (self, stage),
            (ErrorStages::Both, _)
                | (ErrorStages::Dispersion, Stage::Dispersion)
                | (ErrorStages::Pooling, Stage::Pooling)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    /// `M`
    pub magnitude_bound: f64,
    pub distribution: ErrorDistribution,
    pub stages: ErrorStages,
    pub seed: u64,
}

impl ErrorModel {
    pub fn uniform(magnitude_bound: f64, seed: u64) -> Self {
        ErrorModel {
            magnitude_bound,
            distribution: ErrorDistribution::UniformBall,
            stages: ErrorStages::Both,
            seed,
        }
    }

    pub fn with_stages(mut self, stages: ErrorStages) -> Self {
        self.stages = stages;
        self
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        let m = self.magnitude_bound;
        if !(m >= 0.0) || !m.is_finite() {
            return Err(Error::InvalidConfig("error bound must be finite and non-negative"));
        }
        let ok = |v: &Vector| v.len() == dimension && norm(v) <= m * (1.0 + 1e-12);
        let fine = match &self.distribution {
            ErrorDistribution::UniformBall => true,
            ErrorDistribution::FixedVector(v) => ok(v),
            ErrorDistribution::PerNodeTable { dispersion, pooling } => {
                dispersion.values().chain(pooling.values()).all(ok)
            }
        };
        if fine {
            Ok(())
        } else {
            Err(Error::InvalidConfig("error vectors must match the dimension and the bound"))
        }
    }
}

/// Source of perturbations for one run.
struct Injector<'a> {
    model: &'a ErrorModel,
    rng: ChaCha8Rng,
    dimension: usize,
}

impl Injector<'_> {
    fn perturb(&mut self, msg: Message, payload: &mut [f64]) {
        if self.model.magnitude_bound == 0.0 || !self.model.stages.includes(msg.stage) {
            return;
        }
        let e = match &self.model.distribution {
            ErrorDistribution::UniformBall => self.draw_ball(),
            ErrorDistribution::FixedVector(v) => v.clone(),
            ErrorDistribution::PerNodeTable { dispersion, pooling } => {
                let table = match msg.stage {
                    Stage::Dispersion => dispersion,
                    Stage::Pooling => pooling,
                };
                match table.get(&msg.from) {
                    Some(v) => v.clone(),
                    None => return,
                }
            }
        };
        payload.iter_mut().zip(e).for_each(|(p, ei)| *p += ei);
    }

    fn draw_ball(&mut self) -> Vector {
        let d = self.dimension;
        loop {
            let g: Vector = (0..d).map(|_| self.rng.sample(StandardNormal)).collect();
            let n = norm(&g);
            if n > 0.0 {
                let u: f64 = self.rng.random();
                let r = self.model.magnitude_bound * libm::pow(u, 1.0 / d as f64);
                return g.into_iter().map(|v| v * r / n).collect();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `‖x(ω) − x_e⁽ⁿ⁾‖` for `n = 1, 2, …`; empty when `x(ω)` does not exist.
    pub error_norms: Vec<f64>,
    /// Largest entry in the final quarter of `error_norms`.
    pub limsup: Option<f64>,
    /// `ρ(B̂^ω)`
    pub rho: f64,
    /// `K = 2 · depth`
    pub k_factor: usize,
    /// `2KM / (1 − ρ)`; `None` when the system has no unique solution or
    /// the iteration does not contract.
    pub bound: Option<f64>,
    pub holds: Option<bool>,
    /// `x(ω)`
    pub reference: Option<Vector>,
}

/// Runs [`crate::solver::solve`] with perturbed messages. The stopping rule
/// is unchanged, so set `tolerance` to zero to run the full budget.
pub fn solve_with_errors(
    system: &TreeSystem,
    config: &SolverConfig,
    errors: &ErrorModel,
) -> Result<(SolveResult, StabilityReport)> {
    config.validate()?;
    let d = system.dimension();
    errors.validate(d)?;

    let setup = SorSetup::new(system)?;
    let ops = setup.at(config.omega)?;
    let rho = ops.rho_hat;
    let reference = if rho < 1.0 - UNIT_RADIUS_TOL {
        Some(fixed_point(&ops)?)
    } else {
        None
    };
    let k_factor = 2 * system.tree().depth();
    let unique = setup.rank() == d;
    let bound = match (&reference, unique) {
        (Some(_), true) => Some(2.0 * k_factor as f64 * errors.magnitude_bound / (1.0 - rho)),
        _ => None,
    };

    let mut traced = config.clone();
    if traced.trace_level == TraceLevel::Off {
        traced.trace_level = TraceLevel::RootOnly;
    }
    let mut inj = Injector {
        model: errors,
        rng: ChaCha8Rng::seed_from_u64(errors.seed),
        dimension: d,
    };
    let mut result = solve_hooked(system, &traced, |_, m, p| inj.perturb(m, p))?;

    let error_norms: Vec<f64> = match (&reference, &result.trace) {
        (Some(x), Some(t)) => t.records.iter().map(|r| distance(&r.output, x)).collect(),
        _ => Vec::new(),
    };
    if config.trace_level == TraceLevel::Off {
        result.trace = None;
    }
    let limsup = tail_max(&error_norms);
    let holds = match (limsup, bound) {
        (Some(l), Some(b)) => Some(l <= b),
        _ => None,
    };
    Ok((
        result,
        StabilityReport {
            error_norms,
            limsup,
            rho,
            k_factor,
            bound,
            holds,
            reference,
        },
    ))
}

fn tail_max(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let tail = (libm::ceil(v.len() as f64 * LIMSUP_FRACTION) as usize).max(1);
    v[v.len() - tail..].iter().copied().reduce(f64::max)
}

/// `K · max(ε bounds, δ bounds)` with `K = 2 · depth`.
pub fn single_iteration_error_bound(tree: &TreeTopology, eps_bounds: &[f64], delta_bounds: &[f64]) -> Result<f64> {
    let mut m = 0.0f64;
    for &b in eps_bounds.iter().chain(delta_bounds) {
        if !(b >= 0.0) {
            return Err(Error::InvalidConfig("error bounds must be non-negative"));
        }
        m = m.max(b);
    }
    Ok(2.0 * tree.depth() as f64 * m)
}

/// Deviation caused by perturbations in a single iteration from `x`.
pub fn one_iteration_deviation(
    system: &TreeSystem,
    omega: f64,
    x: &[f64],
    errors: &ErrorModel,
) -> Result<f64> {
    errors.validate(system.dimension())?;
    let root = system.tree().root().index();
    let clean = crate::solver::sweep_with(system, omega, x, |_, _| {})?;
    let mut inj = Injector {
        model: errors,
        rng: ChaCha8Rng::seed_from_u64(errors.seed),
        dimension: system.dimension(),
    };
    let noisy = crate::solver::sweep_with(system, omega, x, |m, p| inj.perturb(m, p))?;
    Ok(distance(&clean.pooled[root], &noisy.pooled[root]))
}

/// Uniform ball draws for `count` messages, for inspection.
pub fn sample_ball(magnitude_bound: f64, dimension: usize, count: usize, seed: u64) -> Vec<Vector> {
    let model = ErrorModel::uniform(magnitude_bound, seed);
    let mut inj = Injector {
        model: &model,
        rng: ChaCha8Rng::seed_from_u64(seed),
        dimension,
    };
    (0..count)
        .map(|_| {
            let mut v = vec![0.0; dimension];
            inj.perturb(
                Message {
                    stage: Stage::Dispersion,
                    from: NodeId(0),
                },
                &mut v,
            );
            v
        })
        .collect()
}
