//! Command-line front end behind the `cascade` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cascade::{simulate, CascadeConfig, CascadeModel, DisturbancePlan};
use crate::error::{CaseError, ModelError};
use crate::gridlinalg::{ReferencePolicy, Topology};
use crate::identify::{iterative_search, rank_branches, SearchConfig};
use crate::network::{load_case, PowerNetwork};
use crate::powerflow::solve_power_flow;
use crate::report::{emit_dot, to_json, write_ranking_csv, CascadeReport, RunManifest};
use crate::sensitivity::check_gradients;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cascade", version, about = "DC cascading-failure simulation and worst-disturbance search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the base-case DC power flow.
    Powerflow(PowerflowArgs),
    /// Simulate a cascade from a single initial disturbance.
    Simulate(SimulateArgs),
    /// Search for the worst disturbance on one branch.
    Identify(IdentifyArgs),
    /// Search every branch and rank by best cost.
    Rank(RankArgs),
    /// Load and validate a case file.
    Validate(CaseArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReferenceArg {
    /// Case slack bus, else the highest-id generator, else the lowest id.
    SlackThenGenerator,
    LowestId,
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    #[arg(long)]
    pub case: PathBuf,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
    /// Island reference-bus rule.
    #[arg(long, value_enum, default_value = "slack-then-generator")]
    pub reference: ReferenceArg,
    /// Fraction of nominal susceptance at or below which a branch is open.
    #[arg(long, default_value_t = 1e-3)]
    pub open_fraction: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_zero: f64,
}

impl Common {
    fn topology(&self) -> Topology {
        Topology {
            tol_zero: self.tol_zero,
            open_fraction: self.open_fraction,
            reference: match self.reference {
                ReferenceArg::SlackThenGenerator => ReferencePolicy::CaseSlackThenGenerator,
                ReferenceArg::LowestId => ReferencePolicy::LowestId,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct PowerflowArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Target branch id.
    #[arg(long)]
    pub branch: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub u0: f64,
    /// Number of cascade steps m (defaults to min(branches, 10)).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 5e4)]
    pub sigma: f64,
    #[arg(long)]
    pub reclosing: bool,
    /// Write one DOT graph per step.
    #[arg(long)]
    pub dot: bool,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 5e4)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1)]
    pub iota: usize,
    /// Number of cascade steps m (defaults to min(branches, 10)).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub imax: usize,
    #[arg(long, default_value_t = 1e6)]
    pub jmax: f64,
    /// Overridden by the CASCADE_SEED environment variable.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub root_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long)]
    pub reclosing: bool,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub branch: usize,
    /// Compare analytic derivatives with finite differences along the result.
    #[arg(long)]
    pub check_grad: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<CaseError> for CliError {
    fn from(e: CaseError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::SingularIsland { .. } | ModelError::AtStep { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let arguments = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, arguments) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

struct Output {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn finish(
        mut self,
        command: &str,
        arguments: Vec<String>,
        common: &Common,
        config: impl Serialize,
        started: Instant,
    ) -> CliResult<()> {
        let manifest = RunManifest {
            command: command.into(),
            arguments,
            case_path: common.case.display().to_string(),
            output_dir: self.dir.display().to_string(),
            config: serde_json::to_value(config).expect("configs serialize"),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            artifacts: self.artifacts.clone(),
        };
        self.write("manifest.json", to_json(&manifest))
    }
}

fn branch_index(network: &PowerNetwork, id: usize) -> CliResult<usize> {
    network
        .branch_index(id)
        .ok_or_else(|| CliError::Input(format!("case has no branch with id {id}")))
}

fn default_steps(network: &PowerNetwork, steps: Option<usize>) -> usize {
    steps.unwrap_or_else(|| network.branch_count().min(10))
}

fn seed_override(seed: u64) -> CliResult<u64> {
    match std::env::var("CASCADE_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("CASCADE_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(seed),
    }
}

fn search_config(network: &PowerNetwork, a: &SearchArgs) -> CliResult<SearchConfig> {
    let config = SearchConfig {
        sigma: a.sigma,
        epsilon: a.epsilon,
        iota: a.iota,
        steps: default_steps(network, a.steps),
        i_max: a.imax,
        j_max: a.jmax,
        seed: seed_override(a.seed)?,
        root_tol: a.root_tol,
        max_solver_iterations: a.max_iter,
        reclosing: a.reclosing,
        topology: a.common.topology(),
    };
    config.validate(network)?;
    Ok(config)
}

fn execute(command: Command, arguments: Vec<String>) -> CliResult<i32> {
    let started = Instant::now();
    match command {
        Command::Validate(a) => {
            let net = load_case(&a.case)?;
            println!(
                "{}: {} buses, {} branches, total injection {:.6}",
                a.case.display(),
                net.bus_count(),
                net.branch_count(),
                net.injections().iter().sum::<f64>()
            );
            Ok(EXIT_OK)
        }
        Command::Powerflow(a) => {
            let net = load_case(&a.common.case)?;
            let topo = a.common.topology();
            let y = net.nominal_susceptances();
            let p = net.injections();
            let sol = solve_power_flow(&net, &y, &p, &topo)?;
            #[derive(Serialize)]
            struct PowerflowOut {
                angles: Vec<f64>,
                flows: Vec<f64>,
                balances: Vec<crate::powerflow::IslandBalance>,
            }
            let out = PowerflowOut {
                angles: sol.angles.theta.clone(),
                flows: sol.flows.flows.clone(),
                balances: sol.island_balances(&net, &p),
            };
            let json = to_json(&out);
            match a.format {
                Format::Json => print!("{json}"),
                Format::Text => {
                    println!("{:>5} {:>14}", "bus", "angle");
                    for (b, th) in net.buses().iter().zip(&out.angles) {
                        println!("{:>5} {:>14.6}", b.id, th);
                    }
                    println!("{:>5} {:>5} {:>5} {:>12} {:>10}", "branch", "from", "to", "flow", "threshold");
                    for (br, f) in net.branches().iter().zip(&out.flows) {
                        println!(
                            "{:>5} {:>5} {:>5} {:>12.6} {:>10.4}",
                            br.id, br.from_bus, br.to_bus, f, br.threshold
                        );
                    }
                }
            }
            let mut output = Output::new(&a.common.output_dir)?;
            output.write("powerflow.json", json)?;
            output.finish("powerflow", arguments, &a.common, topo, started)?;
            Ok(EXIT_OK)
        }
        Command::Simulate(a) => {
            let net = load_case(&a.common.case)?;
            let target = branch_index(&net, a.branch)?;
            let steps = default_steps(&net, a.steps);
            let config = CascadeConfig {
                sigma: a.sigma,
                steps,
                reclosing: a.reclosing,
                topology: a.common.topology(),
            };
            let plan = DisturbancePlan::initial(target, a.u0, steps);
            let traj = simulate(&net, &plan, &config)?;
            let report = CascadeReport::from_trajectory(&net, &traj, a.epsilon)?;
            let mut output = Output::new(&a.common.output_dir)?;
            output.write("trajectory.json", to_json(&traj))?;
            output.write("cascade_report.json", to_json(&report))?;
            let mut csv = Vec::new();
            report
                .write_csv(&mut csv)
                .map_err(|e| CliError::Input(e.to_string()))?;
            output.write("cascade_steps.csv", csv)?;
            if a.dot {
                for rec in &traj.steps {
                    output.write(&format!("dot/step_{:02}.dot", rec.k), emit_dot(&net, rec))?;
                }
            }
            print_summary(&report);
            output.finish("simulate", arguments, &a.common, config, started)?;
            Ok(EXIT_OK)
        }
        Command::Identify(a) => {
            let net = load_case(&a.search.common.case)?;
            let target = branch_index(&net, a.branch)?;
            let config = search_config(&net, &a.search)?;
            let result = iterative_search(&net, target, &net.injections(), &config)?;
            let mut output = Output::new(&a.search.common.output_dir)?;
            output.write("search_result.json", to_json(&result))?;
            println!(
                "branch {}: |u0| = {:.6} (signed {:.6}), J* = {:.6}",
                result.branch,
                result.u0().abs(),
                result.u0(),
                result.j_star
            );
            if let Some(traj) = &result.trajectory {
                let report = CascadeReport::from_trajectory(&net, traj, config.epsilon)?;
                output.write("cascade_report.json", to_json(&report))?;
                print_summary(&report);
            }
            if a.check_grad {
                let model = CascadeModel::new(&net, &config.cascade())?;
                let states: Vec<Vec<f64>> = match &result.trajectory {
                    Some(t) => t.steps.iter().map(|s| s.y.0.clone()).collect(),
                    None => vec![net.nominal_susceptances()],
                };
                let mut checks = Vec::new();
                for (k, y) in states.iter().enumerate() {
                    let c = check_gradients(&model, y, 1e-6)?;
                    println!(
                        "k={k}: d_line_state {:.2e}  d_inv_star {:.2e}  d_branch_flow {:.2e}  step_jacobian {:.2e}  (skipped rows {})",
                        c.d_line_state, c.d_inv_star, c.d_branch_flow, c.step_jacobian, c.skipped_rows
                    );
                    checks.push(c);
                }
                output.write("gradient_check.json", to_json(&checks))?;
            }
            output.finish("identify", arguments, &a.search.common, config, started)?;
            if result.found() {
                Ok(EXIT_OK)
            } else {
                eprintln!("error: no solver iteration produced a validated control");
                Ok(EXIT_NUMERICAL)
            }
        }
        Command::Rank(a) => {
            let net = load_case(&a.search.common.case)?;
            let config = search_config(&net, &a.search)?;
            let results = rank_branches(&net, &net.injections(), &config)?;
            let mut output = Output::new(&a.search.common.output_dir)?;
            let mut csv = Vec::new();
            write_ranking_csv(&results, &mut csv).map_err(|e| CliError::Input(e.to_string()))?;
            output.write("ranking.csv", &csv)?;
            output.write("ranking.json", to_json(&results))?;
            print!("{}", String::from_utf8_lossy(&csv));
            output.finish("rank", arguments, &a.search.common, config, started)?;
            Ok(EXIT_OK)
        }
    }
}

fn print_summary(report: &CascadeReport) {
    let s = &report.summary;
    println!(
        "islands {} ({} multi-bus, {} isolated, {} energized); dead branches {:?}; unserved load {:.4}; J = {:.6}",
        s.island_count,
        s.multi_bus_islands,
        s.isolated_buses,
        s.energized_islands,
        s.dead_branches,
        s.unserved_load,
        s.total_cost
    );
}
