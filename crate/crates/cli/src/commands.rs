//! Subcommands. Each returns a [`Report`]; `main` decides where it goes.

use std::f64::consts::FRAC_PI_3;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tree_kaczmarz::linalg::{distance, dot, norm, spectral_radius};
use tree_kaczmarz::oracles::{Example1Config, Example1Variant};
use tree_kaczmarz::robustness::{solve_with_errors, ErrorModel, ErrorStages};
use tree_kaczmarz::sor::{omega_sweep, sweep_radius, OmegaSweep, SorSetup, DEFAULT_OMEGA_MAX, DEFAULT_SWEEP_STEP};
use tree_kaczmarz::topology::TreeTopology;
use tree_kaczmarz::{solve, SolverConfig, TraceLevel, TreeSystem};

use crate::error::{CliError, Result};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::generate::{generate, MatrixKind, TreeShape};
use crate::output::{Cell, Format, Sink, Table};
use crate::problem::{load_problem, save_problem};

#[derive(Debug, Parser)]
#[command(name = "tree-kaczmarz", version, about = "Tree-distributed Kaczmarz solver and experiments")]
pub struct Cli {
    /// Seed for generated matrices and injected errors.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the main table (or generated problem) here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the iteration on a problem file.
    Solve(SolveArgs),
    /// Spectral radius of the restricted iteration matrix over a grid of ω.
    Sweep(SweepArgs),
    /// Standard vs distributed Kaczmarz on random 3×3 or 8×8 matrices.
    Experiment(ExperimentArgs),
    /// Run with additive message errors and compare against the stability bound.
    ErrorSim(ErrorSimArgs),
    /// The two-line example: closed-form vs numeric spectral radius curves.
    Example1(Example1Args),
    /// Write a random problem file.
    Generate(GenerateArgs),
    /// Check a problem file.
    Validate(ValidateArgs),
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be non-negative, got {v}"))
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_parser = positive, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, value_parser = non_negative, default_value_t = tree_kaczmarz::solver::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = tree_kaczmarz::solver::DEFAULT_MAX_ITERATIONS)]
    pub max_iter: usize,
    /// Per-iteration CSV: n, change_norm and error_vs_reference when the
    /// problem carries a reference.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Chain,
    Fig3,
    Fig8,
    /// Tree from `--parents`.
    Custom,
}

/// A problem file or a generated instance.
#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(long, conflicts_with = "kind")]
    pub problem: Option<PathBuf>,
    /// Generate an instance of this kind (uses --seed).
    #[arg(long, value_enum)]
    pub kind: Option<MatrixKind>,
    #[arg(long, value_enum, default_value_t = ShapeArg::Fig8)]
    pub shape: ShapeArg,
    /// Matrix size; defaults to the node count of the shape.
    #[arg(long)]
    pub size: Option<usize>,
    /// Parent of each node, `-` at the root, e.g. `-,0,0,1`.
    #[arg(long, allow_hyphen_values = true)]
    pub parents: Option<String>,
}

impl SourceArgs {
    fn tree_shape(&self) -> Result<(TreeShape, Option<usize>)> {
        Ok(match self.shape {
            ShapeArg::Chain => (TreeShape::Chain, None),
            ShapeArg::Fig3 => (TreeShape::Fig3, Some(3)),
            ShapeArg::Fig8 => (TreeShape::Fig8, Some(8)),
            ShapeArg::Custom => {
                let spec = self
                    .parents
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("--shape custom needs --parents".into()))?;
                let t = parse_parents(spec)?;
                let n = t.node_count();
                (TreeShape::Custom(t), Some(n))
            }
        })
    }

    /// The system and its reference solution, if known.
    pub fn load(&self, seed: u64) -> Result<(TreeSystem, Option<Vec<f64>>)> {
        if let Some(p) = &self.problem {
            let prob = load_problem(p)?;
            return Ok((prob.system, prob.reference));
        }
        let kind = self
            .kind
            .ok_or_else(|| CliError::Usage("give --problem or --kind".into()))?;
        let (shape, natural) = self.tree_shape()?;
        let n = self
            .size
            .or(natural)
            .ok_or_else(|| CliError::Usage("--shape chain needs --size".into()))?;
        let g = generate(kind, &shape, n, seed)?;
        Ok((g.system, Some(g.x_true)))
    }
}

pub fn parse_parents(spec: &str) -> Result<TreeTopology> {
    let parents = spec
        .split(',')
        .map(|t| match t.trim() {
            "-" => Ok(None),
            s => s
                .parse::<usize>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("bad parent entry {s:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if parents.iter().filter(|p| p.is_none()).count() != 1 {
        return Err(CliError::Usage("--parents needs exactly one root (-)".into()));
    }
    TreeTopology::from_parents(&parents).map_err(|e| match e {
        tree_kaczmarz::Error::InvalidTree(v) => {
            CliError::Usage(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "))
        }
        other => other.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Standard,
    Averaged,
}

impl From<VariantArg> for Example1Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => Example1Variant::Standard,
            VariantArg::Averaged => Example1Variant::Averaged,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Sweep the two-line example at this angle instead.
    #[arg(long, conflicts_with_all = ["problem", "kind"])]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = VariantArg::Standard)]
    pub variant: VariantArg,
    #[arg(long, value_parser = positive, default_value_t = DEFAULT_OMEGA_MAX)]
    pub omega_max: f64,
    #[arg(long, value_parser = positive, default_value_t = DEFAULT_SWEEP_STEP)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 3)]
    pub size: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, value_parser = positive, default_value_t = DEFAULT_OMEGA_MAX)]
    pub omega_max: f64,
    #[arg(long, value_parser = positive, default_value_t = DEFAULT_SWEEP_STEP)]
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StagesArg {
    Both,
    Dispersion,
    Pooling,
}

impl From<StagesArg> for ErrorStages {
    fn from(s: StagesArg) -> Self {
        match s {
            StagesArg::Both => ErrorStages::Both,
            StagesArg::Dispersion => ErrorStages::Dispersion,
            StagesArg::Pooling => ErrorStages::Pooling,
        }
    }
}

#[derive(Debug, Args)]
pub struct ErrorSimArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_parser = positive, default_value_t = 1.0)]
    pub omega: f64,
    /// Bound M on every injected error.
    #[arg(long, value_parser = non_negative, default_value_t = 1e-3)]
    pub magnitude: f64,
    #[arg(long, default_value_t = 200)]
    pub iterations: usize,
    #[arg(long, value_enum, default_value_t = StagesArg::Both)]
    pub stages: StagesArg,
}

#[derive(Debug, Args)]
pub struct Example1Args {
    #[arg(long, default_value_t = FRAC_PI_3)]
    pub alpha: f64,
    #[arg(long, value_parser = positive, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, value_parser = positive, default_value_t = DEFAULT_OMEGA_MAX)]
    pub omega_max: f64,
    /// Starting angles for the one-step demos.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0])]
    pub theta: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: MatrixKind,
    #[arg(long, value_enum, default_value_t = ShapeArg::Fig8)]
    pub shape: ShapeArg,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub parents: Option<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub problem: PathBuf,
}

/// Main table plus free-form summary lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub table: Option<Table>,
    pub summary: Vec<String>,
}

pub fn run(cli: &Cli) -> Result<()> {
    let sink = Sink {
        out: cli.out.clone(),
        format: cli.format,
    };
    let report = match &cli.command {
        Command::Solve(a) => cmd_solve(a, cli.format)?,
        Command::Sweep(a) => cmd_sweep(a, cli.seed)?,
        Command::Experiment(a) => cmd_experiment(a, cli.seed)?,
        Command::ErrorSim(a) => cmd_error_sim(a, cli.seed)?,
        Command::Example1(a) => cmd_example1(a)?,
        Command::Generate(a) => cmd_generate(a, cli.seed, cli.out.as_deref())?,
        Command::Validate(a) => cmd_validate(a)?,
    };
    match &report.table {
        Some(t) => sink.emit(t, &report.summary),
        None => {
            report.summary.iter().for_each(|l| println!("{l}"));
            Ok(())
        }
    }
}

pub fn cmd_solve(a: &SolveArgs, format: Format) -> Result<Report> {
    let prob = load_problem(&a.problem)?;
    let cfg = SolverConfig::new(a.omega)
        .with_tolerance(a.tol)
        .with_max_iterations(a.max_iter)
        .with_trace(TraceLevel::RootOnly);
    let res = solve(&prob.system, &cfg)?;

    if let Some(path) = &a.trace {
        let mut headers = vec!["n", "change_norm"];
        if prob.reference.is_some() {
            headers.push("error_vs_reference");
        }
        let mut t = Table::new(&headers);
        for (i, r) in res.trace.iter().flat_map(|t| &t.records).enumerate() {
            let mut row: Vec<Cell> = vec![(i + 1).into(), r.change.into()];
            if let Some(x) = &prob.reference {
                row.push(distance(&r.output, x).into());
            }
            t.push(row);
        }
        t.write_to(path, format)?;
    }

    let mut table = Table::new(&["index", "value"]);
    for (i, &v) in res.solution.iter().enumerate() {
        table.push(vec![i.into(), v.into()]);
    }
    let mut summary = vec![format!(
        "iterations {} converged {} final change {:e}",
        res.iterations_used, res.converged, res.final_change
    )];
    if let Some(x) = &prob.reference {
        summary.push(format!("error vs reference {:e}", distance(&res.solution, x)));
    }
    Ok(Report {
        table: Some(table),
        summary,
    })
}

fn sweep_summary(s: &OmegaSweep) -> Vec<String> {
    let limit = match (s.omega_limit, s.capped) {
        (Some(w), true) => format!(">={w}"),
        (Some(w), false) => format!("{w}"),
        (None, _) => "N/A".into(),
    };
    let mut lines = vec![format!(
        "omega_opt {} rho_opt {} Omega {}",
        s.omega_opt, s.rho_opt, limit
    )];
    if s.capped {
        lines.push("FLAG: rho < 1 at the top of the searched range".into());
    } else if s.omega_limit.is_some_and(|w| w > 4.0) {
        lines.push("FLAG: Omega above 4".into());
    }
    if s.reentry {
        lines.push("note: rho drops back below 1 after the first crossing".into());
    }
    lines
}

fn example1(alpha: f64, variant: Example1Variant) -> Result<Example1Config> {
    Ok(Example1Config::new(alpha, variant)?)
}

/// Numeric sweep over the example's explicit 2×2 iteration matrix.
pub fn example1_sweep(cfg: &Example1Config, omega_max: f64, step: f64) -> Result<OmegaSweep> {
    Ok(sweep_radius(|w| spectral_radius(&cfg.matrix(w)), omega_max, step)?)
}

pub fn cmd_sweep(a: &SweepArgs, seed: u64) -> Result<Report> {
    let s = match a.alpha {
        Some(alpha) => example1_sweep(&example1(alpha, a.variant.into())?, a.omega_max, a.step)?,
        None => {
            let (sys, _) = a.source.load(seed)?;
            omega_sweep(&sys, a.omega_max, a.step)?
        }
    };
    let mut t = Table::new(&["omega", "rho"]);
    for &(w, r) in &s.grid {
        t.push(vec![w.into(), r.into()]);
    }
    Ok(Report {
        table: Some(t),
        summary: sweep_summary(&s),
    })
}

pub fn cmd_experiment(a: &ExperimentArgs, seed: u64) -> Result<Report> {
    let mut cfg = ExperimentConfig::new(a.size, a.trials, seed);
    cfg.omega_max = a.omega_max;
    cfg.step = a.step;
    let rep = run_experiment(&cfg)?;
    Ok(Report {
        table: Some(rep.table()),
        summary: rep.summary(),
    })
}

pub fn cmd_error_sim(a: &ErrorSimArgs, seed: u64) -> Result<Report> {
    let (sys, _) = a.source.load(seed)?;
    let cfg = SolverConfig::new(a.omega)
        .with_tolerance(0.0)
        .with_max_iterations(a.iterations)
        .with_trace(TraceLevel::RootOnly);
    let model = ErrorModel::uniform(a.magnitude, seed).with_stages(a.stages.into());
    let (noisy, report) = solve_with_errors(&sys, &cfg, &model)?;
    let clean = solve(&sys, &cfg)?;
    let records = |r: &tree_kaczmarz::SolveResult| r.trace.as_ref().map(|t| t.records.clone()).unwrap_or_default();
    let (nr, cr) = (records(&noisy), records(&clean));

    let mut t = Table::new(&["n", "deviation", "error", "bound"]);
    for (i, (n, c)) in nr.iter().zip(&cr).enumerate() {
        t.push(vec![
            (i + 1).into(),
            distance(&n.output, &c.output).into(),
            report.error_norms.get(i).copied().into(),
            report.bound.into(),
        ]);
    }
    let fmt_opt = |v: Option<f64>| v.map_or("N/A".to_string(), |x| format!("{x:e}"));
    let summary = vec![
        format!("rho {} K {} M {:e}", report.rho, report.k_factor, a.magnitude),
        format!(
            "limsup {} bound {} holds {}",
            fmt_opt(report.limsup),
            fmt_opt(report.bound),
            report.holds.map_or("N/A".to_string(), |h| h.to_string())
        ),
    ];
    Ok(Report {
        table: Some(t),
        summary,
    })
}

/// Largest `|aᵢ·x₁|` after one iteration from `(cos θ, sin θ)` at `omega`.
pub fn one_step_residual(cfg: &Example1Config, omega: f64, theta: f64) -> Result<f64> {
    let x1 = cfg.matrix(omega).mul_vec(&[theta.cos(), theta.sin()])?;
    let rows = cfg.rows();
    Ok((0..2).map(|i| dot(rows.row(i), &x1).abs()).fold(0.0, f64::max))
}

pub fn cmd_example1(a: &Example1Args) -> Result<Report> {
    let std_cfg = example1(a.alpha, Example1Variant::Standard)?;
    let avg_cfg = example1(a.alpha, Example1Variant::Averaged)?;
    let tree = SorSetup::new(&avg_cfg.as_tree()?)?;
    let tree_rho = |w: f64| -> Result<f64> { Ok(spectral_radius(&tree.at(w)?.matrix.block(2, 2))?) };

    let mut t = Table::new(&[
        "omega",
        "standard_analytic",
        "standard_numeric",
        "averaged_analytic",
        "averaged_numeric",
        "averaged_tree",
    ]);
    let count = (a.omega_max / a.step + 1e-9).floor() as usize;
    for k in 1..=count {
        let w = k as f64 * a.step;
        t.push(vec![
            w.into(),
            std_cfg.spectral_radius(w).into(),
            spectral_radius(&std_cfg.matrix(w))?.into(),
            avg_cfg.spectral_radius(w).into(),
            spectral_radius(&avg_cfg.matrix(w))?.into(),
            tree_rho(w)?.into(),
        ]);
    }

    let mut summary = Vec::new();
    for (name, cfg) in [("standard", &std_cfg), ("averaged", &avg_cfg)] {
        let o = cfg.optima();
        let s = example1_sweep(cfg, a.omega_max, DEFAULT_SWEEP_STEP)?;
        summary.push(format!(
            "{name}: analytic omega_opt {} rho_opt {} Omega {}; numeric omega_opt {} rho_opt {} Omega {}",
            o.omega_opt,
            o.rho_opt,
            o.omega_limit.unwrap_or(f64::NAN),
            s.omega_opt,
            s.rho_opt,
            s.omega_limit.unwrap_or(f64::NAN),
        ));
        for &theta in &a.theta {
            summary.push(format!(
                "{name}: one step from theta {theta} at omega_opt, max residual {:e}",
                one_step_residual(cfg, o.omega_opt, theta)?
            ));
        }
    }
    Ok(Report {
        table: Some(t),
        summary,
    })
}

pub fn cmd_generate(a: &GenerateArgs, seed: u64, out: Option<&std::path::Path>) -> Result<Report> {
    let source = SourceArgs {
        problem: None,
        kind: Some(a.kind),
        shape: a.shape,
        size: a.size,
        parents: a.parents.clone(),
    };
    let (sys, x_true) = source.load(seed)?;
    let summary = match out {
        Some(p) => {
            save_problem(p, &sys, x_true.as_deref())?;
            vec![format!(
                "wrote {} ({} nodes, dimension {}, |x_true| = {})",
                p.display(),
                sys.tree().node_count(),
                sys.dimension(),
                x_true.as_deref().map_or(f64::NAN, norm)
            )]
        }
        None => {
            let file = crate::problem::ProblemFile::from_system(&sys, x_true);
            vec![serde_json::to_string_pretty(&file).expect("serializable")]
        }
    };
    Ok(Report { table: None, summary })
}

pub fn cmd_validate(a: &ValidateArgs) -> Result<Report> {
    let prob = load_problem(&a.problem)?;
    let sys = &prob.system;
    let tree = sys.tree();
    Ok(Report {
        table: None,
        summary: vec![format!(
            "ok: {} nodes, {} rows, dimension {}, depth {}, {} leaves{}",
            tree.node_count(),
            sys.total_rows(),
            sys.dimension(),
            tree.depth(),
            tree.leaves().len(),
            if prob.reference.is_some() { ", with reference" } else { "" }
        )],
    })
}
