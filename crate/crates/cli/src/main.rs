use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sucil::bench::{self, CapPolicy, Metric, SuiteConfig};
use sucil::milp_export::{build_cpf, export_lp, export_sidecar, ConstantBundle, CpfOptions, CutFamily};
use sucil::problems::{convexity_probe, Objective, ProblemSpec, PROBLEMS};
use sucil::solver::{solve, Certificate, SolveError, Tolerances, Variant, VariantConfig};
use sucil::{Domain, LatticePoint};

const OUTPUT_ENV: &str = "SUCIL_OUTPUT_DIR";

/// Certified minimization of convex functions on integer lattices.
#[derive(Parser, Debug)]
#[command(name = "sucil", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize one test problem and print its certificate.
    Solve(SolveArgs),
    /// Run variants over a grid of problems and dimensions and write profiles.
    Bench(BenchArgs),
    /// Write the mixed-integer model of the bound after some iterations.
    ExportMilp(ExportArgs),
    /// Randomized convexity check of a test problem on a box.
    ProbeConvexity(ProbeArgs),
    /// List the built-in test problems.
    ListProblems,
}

#[derive(Args, Debug)]
struct Instance {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    n: usize,
    /// Lower and upper bound shared by every coordinate.
    #[arg(long = "box", num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true, default_values_t = [-4, 4])]
    bounds: Vec<i64>,
    /// Use the open chain form of abhi instead of the cyclic one.
    #[arg(long)]
    abhi_chain: bool,
}

impl Instance {
    fn spec(&self) -> Result<ProblemSpec> {
        Ok(ProblemSpec::new(&self.problem, self.n)?.with_abhi_chain(self.abhi_chain))
    }

    fn domain(&self) -> Result<Domain> {
        Ok(Domain::cube(self.n, self.bounds[0], self.bounds[1])?)
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct TolArgs {
    /// Relative pivot threshold below which a point set is not poised.
    #[arg(long, default_value_t = Tolerances::default().poised)]
    poised_tol: f64,
    /// Slack on facet values in cone membership tests.
    #[arg(long, default_value_t = Tolerances::default().membership)]
    membership_tol: f64,
    /// Gap below which lower and upper bounds count as equal.
    #[arg(long, default_value_t = Tolerances::default().bound)]
    bound_tol: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Result<Tolerances> {
        for (name, v) in [("poised", self.poised_tol), ("membership", self.membership_tol), ("bound", self.bound_tol)] {
            if !(v.is_finite() && v >= 0.0) {
                bail!("--{name}-tol must be a nonnegative number, got {v}");
            }
        }
        Ok(Tolerances { poised: self.poised_tol, membership: self.membership_tol, bound: self.bound_tol })
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Result path; defaults to a name derived from the run inside $SUCIL_OUTPUT_DIR or the current directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Overwrite existing result files.
    #[arg(long)]
    force: bool,
}

impl OutputArgs {
    fn path(&self, default_name: &str) -> PathBuf {
        match &self.output {
            Some(p) => p.clone(),
            None => default_dir().join(default_name),
        }
    }
}

fn default_dir() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    instance: Instance,
    /// sucil, noTR, ideal1, ideal2 or framework.
    #[arg(long, default_value = "sucil")]
    variant: String,
    /// Maximum number of evaluations.
    #[arg(long)]
    budget: Option<usize>,
    /// Center of the initial stencil as comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    start: Option<Vec<i64>>,
    #[command(flatten)]
    tol: TolArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, num_args = 1.., default_values_t = [3usize, 4, 5])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "sucil,noTR,ideal1,ideal2")]
    variants: Vec<String>,
    /// Problems to run; all built-in problems by default.
    #[arg(long, value_delimiter = ',')]
    problems: Option<Vec<String>>,
    #[arg(long = "box", num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true, default_values_t = [-4, 4])]
    bounds: Vec<i64>,
    #[arg(long, default_value_t = 1000)]
    budget: usize,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Add the shipped third-party reference counts to the profiles.
    #[arg(long)]
    with_reference: bool,
    /// Count budget-capped runs at their capped value instead of as unsolved.
    #[arg(long)]
    literal_caps: bool,
    #[arg(long)]
    abhi_chain: bool,
    #[command(flatten)]
    tol: TolArgs,
    /// Output directory; defaults to $SUCIL_OUTPUT_DIR or the current directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    instance: Instance,
    /// Build the model from the points evaluated before this iteration.
    #[arg(long, default_value_t = 1)]
    iters: usize,
    /// One big-M for every cut row instead of a per-cut value.
    #[arg(long)]
    single_big_m: bool,
    /// Add no-good rows that pin eta at every evaluated point.
    #[arg(long)]
    no_good: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::ExportMilp(a) => cmd_export(a),
        Command::ProbeConvexity(a) => cmd_probe(a),
        Command::ListProblems => {
            print!("{}", list_problems());
            Ok(0)
        }
    }
}

fn check_writable(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("{} exists; pass --force to overwrite", path.display());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn fmt_point(x: &LatticePoint) -> String {
    let c: Vec<String> = x.coords().iter().map(|v| v.to_string()).collect();
    format!("({})", c.join(", "))
}

fn parse_variant(s: &str) -> Result<Variant> {
    Variant::parse(s).ok_or_else(|| anyhow!("unknown variant {s:?}; use sucil, noTR, ideal1, ideal2 or framework"))
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    let spec = a.instance.spec()?;
    let dom = a.instance.domain()?;
    let variant = parse_variant(&a.variant)?;
    let start = match &a.start {
        Some(c) if c.len() != dom.dim() => bail!("--start has {} coordinates, expected {}", c.len(), dom.dim()),
        Some(c) => LatticePoint::new(c.clone()),
        None => spec.default_start(&dom),
    };
    let mut cfg = VariantConfig::new(variant).with_start(start.clone());
    cfg.budget = a.budget;
    cfg.tol = a.tol.tolerances()?;
    let path = a.out.path(&format!("{}_n{}_{}.json", spec.name(), dom.dim(), variant.name()));
    check_writable(&path, a.out.force)?;
    let cert = match solve(&spec, &dom, &cfg) {
        Ok(c) => c,
        Err(SolveError::StencilOutsideDomain(p)) => bail!(
            "initial stencil point {} lies outside the box; pick a start at least one step inside every bound, \
             for example --start {}",
            fmt_point(&p),
            dom.midpoint().coords().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        ),
        Err(e) => return Err(e.into()),
    };
    write_file(&path, serde_json::to_string_pretty(&cert)?.as_bytes())?;
    print!("{}", solve_summary(&cert, &path));
    Ok(if cert.certified() { 0 } else { 2 })
}

fn solve_summary(c: &Certificate, path: &Path) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "problem     {} (n={}, box {:?} to {:?})", c.problem, c.n, c.lower_bounds, c.upper_bounds);
    let _ = writeln!(s, "variant     {}", c.variant.name());
    let status = if c.certified() { "certified" } else { "budget exhausted" };
    let _ = writeln!(s, "status      {status}");
    let _ = writeln!(s, "x*          {}", fmt_point(&c.x_best));
    let _ = writeln!(s, "f*          {}", c.f_best);
    let _ = writeln!(s, "bounds      l = {}, u = {}", c.lower, c.upper);
    let _ = writeln!(s, "evaluations {} (best first evaluated at {})", c.evaluations, c.first_opt_eval);
    let _ = writeln!(s, "iterations  {}", c.iterations.len());
    let _ = writeln!(s, "result      {}", path.display());
    s
}

fn cmd_bench(a: BenchArgs) -> Result<u8> {
    let variants = a.variants.iter().map(|v| parse_variant(v)).collect::<Result<Vec<_>>>()?;
    let problems = match a.problems {
        Some(p) => {
            for name in &p {
                sucil::problems::lookup(name)?;
            }
            p
        }
        None => PROBLEMS.iter().map(|p| p.name.to_string()).collect(),
    };
    if a.n.is_empty() || a.n.iter().any(|&n| n == 0) {
        bail!("--n needs positive dimensions");
    }
    if a.bounds[0] > a.bounds[1] {
        bail!("--box lower bound exceeds upper bound");
    }
    let cfg = SuiteConfig {
        problems,
        dims: a.n.clone(),
        lower: a.bounds[0],
        upper: a.bounds[1],
        variants,
        budget: Some(a.budget),
        jobs: a.jobs,
        abhi_chain: a.abhi_chain,
        tol: a.tol.tolerances()?,
    };
    let dir = a.output.clone().unwrap_or_else(default_dir);
    let files = [
        "records.csv",
        "records.json",
        "terminate.csv",
        "first_opt.csv",
        "profile_terminate.csv",
        "profile_first_opt.csv",
    ];
    for f in files {
        check_writable(&dir.join(f), a.force)?;
    }
    let mut records = bench::run_suite(&cfg);
    if a.with_reference {
        let ours: std::collections::BTreeSet<(String, usize)> =
            records.iter().map(|r| (r.problem.clone(), r.n)).collect();
        records.extend(
            bench::reference_records()
                .into_iter()
                .filter(|r| !r.solver.starts_with("SUCIL") && ours.contains(&(r.problem.clone(), r.n))),
        );
        bench::sort_records(&mut records);
    }
    let policy = if a.literal_caps { CapPolicy::Literal } else { CapPolicy::Infinite };
    let mut buf = Vec::new();
    bench::write_records_csv(&records, &mut buf)?;
    write_file(&dir.join("records.csv"), &buf)?;
    write_file(&dir.join("records.json"), serde_json::to_string_pretty(&records)?.as_bytes())?;
    let mut summary = String::new();
    for (metric, table, profile) in [
        (Metric::Terminate, "terminate.csv", "profile_terminate.csv"),
        (Metric::FirstOpt, "first_opt.csv", "profile_first_opt.csv"),
    ] {
        let mut buf = Vec::new();
        bench::write_metric_csv(&records, metric, policy, &mut buf)?;
        write_file(&dir.join(table), &buf)?;
        let curves = bench::make_profile(&records, metric, policy)?;
        let mut buf = Vec::new();
        bench::write_profile_csv(&curves, &mut buf)?;
        write_file(&dir.join(profile), &buf)?;
        let _ = writeln!(summary, "best or tied ({}):", metric.name());
        for c in &curves {
            let _ = writeln!(summary, "  {:<14} {}/{}", c.solver, c.wins(), c.ratios.len());
        }
    }
    println!("{:<14} {:<8} {:>2} {:>10} {:>6} {:<9}", "solver", "problem", "n", "terminate", "first", "certified");
    for r in records.iter().filter(|r| !r.external) {
        let first = r.first_opt.map_or("-".to_string(), |v| v.to_string());
        let cert = match &r.error {
            Some(e) => format!("error: {e}"),
            None => r.certified.to_string(),
        };
        println!("{:<14} {:<8} {:>2} {:>10} {:>6} {}", r.solver, r.problem, r.n, r.terminate, first, cert);
    }
    print!("{summary}");
    println!("results in {}", dir.display());
    Ok(0)
}

fn cmd_export(a: ExportArgs) -> Result<u8> {
    if a.iters == 0 {
        bail!("--iters counts from 1");
    }
    let spec = a.instance.spec()?;
    let dom = a.instance.domain()?;
    let n = dom.dim();
    let path = a.out.path(&format!("{}_n{}_k{}.lp", spec.name(), n, a.iters));
    let sidecar = path.with_extension("constants.txt");
    check_writable(&path, a.out.force)?;
    check_writable(&sidecar, a.out.force)?;
    let cfg = VariantConfig::new(Variant::Framework)
        .with_start(spec.default_start(&dom))
        .with_budget(2 * n + a.iters);
    let cert = solve(&spec, &dom, &cfg)?;
    let family = CutFamily::enumerate(&cert.evaluated)?;
    let l_f = cert.lower.min(cert.upper);
    let constants = ConstantBundle::derive(&family, &dom, l_f.is_finite().then_some(l_f))?;
    let options = CpfOptions { single_big_m: a.single_big_m, no_good: a.no_good };
    let model = build_cpf(&family, &dom, &constants, options);
    export_lp(&model, &path)?;
    export_sidecar(&model, &sidecar)?;
    let c = model.counts();
    println!("points      {}", family.points.len());
    println!("cuts        {}", family.len());
    println!("binaries    {}", c.binaries);
    println!("continuous  {}", c.continuous);
    println!("integers    {}", c.integers);
    println!("rows        {}", c.rows);
    println!("l_f         {}", constants.l_f);
    println!("M_eta       {}", constants.m_eta);
    println!("eps_lambda  {}", constants.eps_lambda);
    println!("M_lambda    {}", constants.m_lambda);
    println!("model       {}", path.display());
    println!("constants   {}", sidecar.display());
    Ok(0)
}

fn cmd_probe(a: ProbeArgs) -> Result<u8> {
    let spec = a.instance.spec()?;
    let dom = a.instance.domain()?;
    let path = a.out.path(&format!("probe_{}_n{}_seed{}.json", spec.name(), dom.dim(), a.seed));
    check_writable(&path, a.out.force)?;
    let report = convexity_probe(&spec, &dom, a.trials, a.seed);
    write_file(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    println!("problem   {} (n={})", spec.name(), dom.dim());
    println!("trials    {} ({} skipped)", report.trials, report.skipped);
    match &report.violation {
        None => println!("result    no violation found"),
        Some(v) => println!(
            "result    violation at {}: f = {} > {} from {} points",
            fmt_point(&v.x),
            v.fx,
            v.combination,
            v.points.len()
        ),
    }
    println!("report    {}", path.display());
    Ok(if report.passed() { 0 } else { 2 })
}

fn list_problems() -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:>5} {:>8} {:>9}  formula", "name", "min n", "f*", "x*");
    for p in &PROBLEMS {
        let _ = writeln!(s, "{:<8} {:>5} {:>8} {:>9}  {}", p.name, p.min_dim, p.optimal_value, p.optimizer, p.formula);
    }
    s
}
