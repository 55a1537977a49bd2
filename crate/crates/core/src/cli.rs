//! Command-line front end. Glue only: read files, call the library, write
//! files. Exit codes are 0 on success, 1 on domain errors (invalid input
//! content, rejected solutions, oracle refusals) and 2 on usage errors and
//! unreadable files. Diagnostics go to standard error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::heuristic::{embed, HeuristicParams};
use crate::io::{
    configuration_to_json, network_to_json, parse_configuration, parse_network, parse_scenario, parse_sources,
    parse_template, read_file, sources_to_json, template_to_json,
};
use crate::milp::{build_model, emit_lp, import_solution};
use crate::model::{
    default_weights, score, validate_configuration, validate_template, ConfigurationScore, Service, SubstrateNetwork,
    SystemConfiguration, Template, Weights,
};
use crate::oracle::{brute_force_embed, OracleLimits};
use crate::reduction::{to_embedding, SetCoverInstance};
use crate::scenario::{run_scenario, write_metrics_csv, Algorithm};

#[derive(Debug, Parser)]
#[command(name = "tembed", version, about = "Embed multi-component services into a substrate network")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed services and write the resulting configuration.
    Solve(SolveArgs),
    /// Replay a scenario and write per-event metrics.
    Simulate(SimulateArgs),
    /// Write the mixed-integer program in LP format.
    ExportLp(ExportArgs),
    /// Read an external solver's solution back into a configuration.
    ImportSol(ImportArgs),
    /// Build an embedding instance from a set-cover input.
    GenReduction(ReductionArgs),
    /// Check input files and report every issue found.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveAlgo {
    Heuristic,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulateAlgo {
    Heuristic,
    Oracle,
    ExportLp,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Template file; repeat for several services.
    #[arg(long = "template", required = true)]
    pub templates: Vec<PathBuf>,
    #[arg(long)]
    pub sources: PathBuf,
    /// Previous configuration; churn is measured against it.
    #[arg(long)]
    pub prev: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Weight of the violation count; derived from the instance by default.
    #[arg(long)]
    pub m1: Option<f64>,
    /// Weight of delay and churn; derived from the instance by default.
    #[arg(long)]
    pub m2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long, default_value_t = OracleLimits::default().max_nodes)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = OracleLimits::default().max_components)]
    pub max_components: usize,
    #[arg(long, default_value_t = OracleLimits::default().max_total_instances)]
    pub max_instances: usize,
    /// Rate quantum for splitting flows.
    #[arg(long, default_value_t = OracleLimits::default().rate_granularity)]
    pub granularity: f64,
    /// Candidate paths per node pair.
    #[arg(long, default_value_t = OracleLimits::default().paths_per_pair)]
    pub paths: usize,
    /// Refuse when the unpruned search space has more leaves than this.
    #[arg(long, default_value = "1e40")]
    pub max_estimate: f64,
}

impl LimitArgs {
    fn limits(&self) -> OracleLimits {
        OracleLimits {
            max_nodes: self.max_nodes,
            max_components: self.max_components,
            max_total_instances: self.max_instances,
            rate_granularity: self.granularity,
            paths_per_pair: self.paths,
            max_estimate: self.max_estimate,
            ..OracleLimits::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value_t = SolveAlgo::Heuristic)]
    pub algo: SolveAlgo,
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[command(flatten)]
    pub limits: LimitArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Replaces the network named in the scenario.
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SimulateAlgo::Heuristic)]
    pub algo: SimulateAlgo,
    /// Output directory for `--algo export-lp`.
    #[arg(long)]
    pub lp_dir: Option<PathBuf>,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub limits: LimitArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub weights: WeightArgs,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// LP file written by `export-lp`; checked against the program rebuilt
    /// from the instance files.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub sol: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub weights: WeightArgs,
}

#[derive(Debug, Args)]
pub struct ReductionArgs {
    #[arg(long)]
    pub universe: usize,
    /// Subsets separated by `;`, elements by `,`, e.g. `1,2;2,3`.
    #[arg(long)]
    pub sets: String,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long = "template")]
    pub templates: Vec<PathBuf>,
    /// Needs `--network` and at least one template.
    #[arg(long)]
    pub sources: Option<PathBuf>,
    /// Needs `--network`.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Failures sorted by exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(m) => Failure::Usage(m),
            other => Failure::Domain(other.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

pub fn main_exit_code() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::ExportLp(a) => export_lp(a),
        Command::ImportSol(a) => import_sol(a),
        Command::GenReduction(a) => gen_reduction(a),
        Command::Validate(a) => validate(a),
    }
}

fn require_files<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Outcome<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Failure::Usage(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Outcome<()> {
    std::fs::write(path, text).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

struct Instance {
    net: SubstrateNetwork,
    services: Vec<Service>,
    prev: SystemConfiguration,
}

fn load_instance(a: &InstanceArgs) -> Outcome<Instance> {
    require_files([&a.network, &a.sources].into_iter().chain(&a.templates).chain(&a.prev))?;
    let net = parse_network(&read_file(&a.network)?)?;
    let templates = a.templates.iter().map(|p| parse_template(&read_file(p)?)).collect::<Result<Vec<Template>>>()?;
    let mut names = std::collections::BTreeSet::new();
    for t in &templates {
        t.ensure_valid()?;
        if !names.insert(t.name.clone()) {
            return Err(Failure::Domain(format!("two templates are named `{}`", t.name)));
        }
    }
    let mut sources = parse_sources(&read_file(&a.sources)?, &net, &templates)?;
    let services: Vec<Service> = templates
        .into_iter()
        .map(|t| {
            let s = sources.remove(&t.name).unwrap_or_default();
            Service::new(t, s)
        })
        .collect();
    for s in &services {
        s.validate(&net)?;
    }
    let prev = match &a.prev {
        Some(p) => parse_configuration(&read_file(p)?, &net)?,
        None => SystemConfiguration::empty(net.clone()),
    };
    Ok(Instance { net, services, prev })
}

fn weights(w: &WeightArgs, inst: &Instance) -> Outcome<Weights> {
    let d = default_weights(&inst.net, &inst.services)?;
    Ok(Weights { m1: w.m1.unwrap_or(d.m1), m2: w.m2.unwrap_or(d.m2) })
}

fn print_score(s: &ConfigurationScore) {
    println!("violations: {}", s.n_violations);
    println!("objective: {}", s.objective);
    println!("total_delay: {}", s.total_delay);
    println!("churn: {}", s.churn);
    println!("total_cpu: {}", s.total_cpu);
    println!("total_mem: {}", s.total_mem);
    println!("total_rate: {}", s.total_rate);
}

fn solve(a: SolveArgs) -> Outcome<()> {
    let inst = load_instance(&a.instance)?;
    let w = weights(&a.weights, &inst)?;
    let cfg = match a.algo {
        SolveAlgo::Heuristic => {
            embed(&inst.prev, &inst.services, &HeuristicParams { rng_seed: a.seed, ..HeuristicParams::default() })?
        }
        SolveAlgo::Oracle => {
            let reference = a.instance.prev.is_some().then_some(&inst.prev);
            let sol = brute_force_embed(&inst.net, &inst.services, reference, &a.limits.limits())?;
            eprintln!("oracle explored {} nodes (estimate {:.3e})", sol.explored, sol.estimate);
            sol.config
        }
    };
    let s = score(&cfg, Some(&inst.prev), w);
    write(&a.out, &configuration_to_json(&cfg, Some(&s)))?;
    print_score(&s);
    Ok(())
}

fn simulate(a: SimulateArgs) -> Outcome<()> {
    require_files([&a.scenario].into_iter().chain(&a.network))?;
    let net = match &a.network {
        Some(p) => Some(parse_network(&read_file(p)?)?),
        None => None,
    };
    let base = a.scenario.parent().unwrap_or(Path::new("."));
    let spec = parse_scenario(&read_file(&a.scenario)?, base, net)?;
    let algo = match a.algo {
        SimulateAlgo::Heuristic => {
            Algorithm::Heuristic(HeuristicParams { rng_seed: a.seed, ..HeuristicParams::default() })
        }
        SimulateAlgo::Oracle => Algorithm::Oracle(a.limits.limits()),
        SimulateAlgo::ExportLp => match &a.lp_dir {
            Some(d) => Algorithm::ExportLp(d.clone()),
            None => return Err(Failure::Usage("--algo export-lp needs --lp-dir".into())),
        },
    };
    let records = run_scenario(&spec.network, &spec.templates, &spec.events, &algo)?;
    write_metrics_csv(&records, &a.csv).map_err(|e| Failure::Domain(e.to_string()))?;
    println!("events: {}", records.len());
    if let Some(last) = records.last() {
        println!("final instances: {}", last.instances);
        println!("final violations: {}", last.violations);
    }
    Ok(())
}

fn export_lp(a: ExportArgs) -> Outcome<()> {
    let inst = load_instance(&a.instance)?;
    let w = weights(&a.weights, &inst)?;
    let reference = a.instance.prev.is_some().then_some(&inst.prev);
    let model = build_model(&inst.net, &inst.services, reference, w)?;
    write(&a.out, &emit_lp(&model))?;
    println!("variables: {}", model.var_count());
    println!("constraints: {}", model.constraint_count());
    Ok(())
}

fn import_sol(a: ImportArgs) -> Outcome<()> {
    require_files([&a.sol].into_iter().chain(&a.model))?;
    let inst = load_instance(&a.instance)?;
    let w = weights(&a.weights, &inst)?;
    let reference = a.instance.prev.is_some().then_some(&inst.prev);
    let model = build_model(&inst.net, &inst.services, reference, w)?;
    if let Some(p) = &a.model {
        if read_file(p)? != emit_lp(&model) {
            return Err(Failure::Domain(format!(
                "{} does not match the program built from the instance files and weights",
                p.display()
            )));
        }
    }
    let imported = import_solution(&model, &read_file(&a.sol)?)?;
    if let Some(claimed) = imported.claimed_objective {
        let rel = (claimed - imported.model_objective).abs() / claimed.abs().max(1.0);
        if rel > 1e-6 {
            eprintln!(
                "warning: solution states objective {claimed}, the program evaluates to {}",
                imported.model_objective
            );
        }
    }
    if let Some(out) = &a.out {
        write(out, &configuration_to_json(&imported.config, Some(&imported.score)))?;
    }
    print_score(&imported.score);
    println!("model_objective: {}", imported.model_objective);
    Ok(())
}

fn parse_sets(text: &str) -> Outcome<Vec<Vec<usize>>> {
    text.split(';')
        .map(|set| {
            set.split(',')
                .filter(|e| !e.trim().is_empty())
                .map(|e| e.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("bad element `{e}` in --sets"))))
                .collect()
        })
        .collect()
}

fn gen_reduction(a: ReductionArgs) -> Outcome<()> {
    let sc = SetCoverInstance::new(a.universe, parse_sets(&a.sets)?, a.k)?;
    let r = to_embedding(&sc)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::Domain(format!("{}: {e}", a.out.display())))?;
    write(&a.out.join("network.json"), &network_to_json(&r.substrate))?;
    write(&a.out.join("template.json"), &template_to_json(&r.template))?;
    write(&a.out.join("sources.json"), &sources_to_json(&r.substrate, &[(&r.template, &r.sources)]))?;
    println!("nodes: {}", r.substrate.node_count());
    println!("links: {}", r.substrate.link_count());
    Ok(())
}

fn validate(a: ValidateArgs) -> Outcome<()> {
    require_files(a.network.iter().chain(&a.templates).chain(&a.sources).chain(&a.config))?;
    if a.network.is_none() && (a.sources.is_some() || a.config.is_some()) {
        return Err(Failure::Usage("--sources and --config need --network".into()));
    }
    if a.sources.is_some() && a.templates.is_empty() {
        return Err(Failure::Usage("--sources needs at least one --template".into()));
    }
    if a.network.is_none() && a.templates.is_empty() {
        return Err(Failure::Usage("nothing to validate".into()));
    }
    let mut problems: Vec<String> = Vec::new();
    let net = match &a.network {
        Some(p) => Some(parse_network(&read_file(p)?)?),
        None => None,
    };
    let mut templates = Vec::new();
    for p in &a.templates {
        let t = parse_template(&read_file(p)?)?;
        let issues = validate_template(&t);
        problems.extend(issues.iter().map(|i| format!("{}: {i}", p.display())));
        if issues.is_empty() {
            templates.push(t);
        }
    }
    if let (Some(net), Some(p)) = (&net, &a.sources) {
        if templates.len() == a.templates.len() {
            let by_service: BTreeMap<_, _> = parse_sources(&read_file(p)?, net, &templates)?;
            for t in &templates {
                let svc = Service::new(t.clone(), by_service.get(&t.name).cloned().unwrap_or_default());
                if let Err(e) = svc.validate(net) {
                    problems.push(format!("{}: {e}", p.display()));
                }
            }
        }
    }
    if let (Some(net), Some(p)) = (&net, &a.config) {
        let cfg = parse_configuration(&read_file(p)?, net)?;
        problems.extend(validate_configuration(&cfg).iter().map(|i| format!("{}: {i}", p.display())));
    }
    if problems.is_empty() {
        println!("ok");
        Ok(())
    } else {
        for m in &problems {
            eprintln!("{m}");
        }
        Err(Failure::Domain(format!("{} issue(s) found", problems.len())))
    }
}
