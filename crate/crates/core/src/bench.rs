//! Batch runs over the test set and performance profiles.
//!
//! A profile compares solvers on a common set of problems by the ratio of
//! each solver's evaluation count to the best count on that problem:
//! `r = N / min_s N` and `rho_s(alpha) = |{p : r_{p,s} <= alpha}| / |P|`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::Domain;
use crate::problems::{Objective, ProblemSpec, PROBLEMS};
use crate::solver::{solve, CutStats, Tolerances, Variant, VariantConfig};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no record for solver {solver} on {problem} n={n}")]
    MissingPair { solver: String, problem: String, n: usize },
    #[error("two records for solver {solver} on {problem} n={n}")]
    DuplicatePair { solver: String, problem: String, n: usize },
    #[error("line {line}: {message}")]
    SchemaMismatch { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub solver: String,
    pub problem: String,
    pub n: usize,
    /// Evaluations until the certificate or the budget.
    pub terminate: usize,
    /// Evaluations until a global minimizer was first evaluated.
    pub first_opt: Option<usize>,
    pub certified: bool,
    /// Stopped by the evaluation budget.
    pub capped: bool,
    /// Transcribed reference data rather than a run of this library.
    pub external: bool,
    pub wall_seconds: f64,
    pub cut_stats: Vec<CutStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    Terminate,
    FirstOpt,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Terminate => "terminate",
            Metric::FirstOpt => "first_opt",
        }
    }
}

/// How budget-capped runs enter a terminate profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapPolicy {
    /// Capped runs never count as solved.
    #[default]
    Infinite,
    /// Use the capped count as printed.
    Literal,
}

impl RunRecord {
    /// `N_{p,s}` for a metric; infinite when the run does not count.
    pub fn value(&self, metric: Metric, policy: CapPolicy) -> f64 {
        if self.error.is_some() {
            return f64::INFINITY;
        }
        match metric {
            Metric::Terminate if self.capped && policy == CapPolicy::Infinite => f64::INFINITY,
            Metric::Terminate => self.terminate as f64,
            Metric::FirstOpt => self.first_opt.map_or(f64::INFINITY, |v| v as f64),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub problems: Vec<String>,
    pub dims: Vec<usize>,
    pub lower: i64,
    pub upper: i64,
    pub variants: Vec<Variant>,
    pub budget: Option<usize>,
    pub jobs: usize,
    pub abhi_chain: bool,
    pub tol: Tolerances,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            problems: PROBLEMS.iter().map(|p| p.name.to_string()).collect(),
            dims: vec![3, 4, 5],
            lower: -4,
            upper: 4,
            variants: vec![Variant::Sucil, Variant::SucilNoTr, Variant::SucilIdeal1, Variant::SucilIdeal2],
            budget: Some(1000),
            jobs: 1,
            abhi_chain: false,
            tol: Tolerances::default(),
        }
    }
}

/// Solve one instance on the suite's box and summarize it.
pub fn run_instance(problem: &str, n: usize, variant: Variant, cfg: &SuiteConfig) -> RunRecord {
    let mut rec = RunRecord {
        solver: variant.name().to_string(),
        problem: problem.to_string(),
        n,
        terminate: 0,
        first_opt: None,
        certified: false,
        capped: false,
        external: false,
        wall_seconds: 0.0,
        cut_stats: Vec::new(),
        error: None,
    };
    let spec = match ProblemSpec::new(problem, n) {
        Ok(s) => s.with_abhi_chain(cfg.abhi_chain),
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.problem = spec.name().to_string();
    let dom = match Domain::cube(n, cfg.lower, cfg.upper) {
        Ok(d) => d,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let mut vc = VariantConfig::new(variant).with_start(spec.default_start(&dom));
    vc.budget = cfg.budget;
    vc.tol = cfg.tol;
    let t0 = std::time::Instant::now();
    match solve(&spec, &dom, &vc) {
        Ok(cert) => {
            rec.wall_seconds = t0.elapsed().as_secs_f64();
            rec.terminate = cert.evaluations;
            rec.certified = cert.certified();
            rec.capped = !rec.certified;
            let target = if rec.certified {
                Some(cert.f_best)
            } else {
                let opt = spec.optimizers().representative(n);
                dom.contains(opt.coords()).then(|| spec.optimal_value())
            };
            rec.first_opt = target.and_then(|t| {
                cert.evaluated.iter().position(|(_, f)| *f <= t + vc.tol.bound).map(|p| p + 1)
            });
            rec.cut_stats = cert.iterations.into_iter().map(|it| it.stats).collect();
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Every (variant, problem, n) combination, run on `jobs` worker threads and
/// returned in canonical order.
pub fn run_suite(cfg: &SuiteConfig) -> Vec<RunRecord> {
    let mut jobs = Vec::new();
    for &v in &cfg.variants {
        for &n in &cfg.dims {
            for p in &cfg.problems {
                jobs.push((v, n, p.clone()));
            }
        }
    }
    let work = || -> Vec<RunRecord> {
        jobs.par_iter()
            .map(|(v, n, p)| run_instance(p, *n, *v, cfg))
            .collect()
    };
    let mut records = match rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    };
    sort_records(&mut records);
    records
}

pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| (&a.solver, a.n, &a.problem).cmp(&(&b.solver, b.n, &b.problem)));
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileCurve {
    pub solver: String,
    /// `r_{p,s}` over all problems, ascending; infinite for unsolved problems.
    pub ratios: Vec<f64>,
    /// `(alpha, rho(alpha))` at every finite ratio of any solver.
    pub samples: Vec<(f64, f64)>,
}

impl ProfileCurve {
    pub fn rho(&self, alpha: f64) -> f64 {
        if self.ratios.is_empty() {
            return 0.0;
        }
        self.ratios.iter().filter(|&&r| r <= alpha).count() as f64 / self.ratios.len() as f64
    }

    /// Problems on which this solver is best or tied for best.
    pub fn wins(&self) -> usize {
        self.ratios.iter().filter(|&&r| r == 1.0).count()
    }
}

/// Profile curves for every solver in `records`, ordered by solver name.
pub fn make_profile(records: &[RunRecord], metric: Metric, policy: CapPolicy) -> Result<Vec<ProfileCurve>, BenchError> {
    let solvers: BTreeSet<&str> = records.iter().map(|r| r.solver.as_str()).collect();
    let problems: BTreeSet<(&str, usize)> = records.iter().map(|r| (r.problem.as_str(), r.n)).collect();
    let mut table: BTreeMap<(&str, usize, &str), f64> = BTreeMap::new();
    for r in records {
        if table.insert((&r.problem, r.n, &r.solver), r.value(metric, policy)).is_some() {
            return Err(BenchError::DuplicatePair { solver: r.solver.clone(), problem: r.problem.clone(), n: r.n });
        }
    }
    let mut ratios: BTreeMap<&str, Vec<f64>> = solvers.iter().map(|&s| (s, Vec::new())).collect();
    for &(p, n) in &problems {
        let mut vals = Vec::with_capacity(solvers.len());
        for &s in &solvers {
            let v = *table.get(&(p, n, s)).ok_or_else(|| BenchError::MissingPair {
                solver: s.to_string(),
                problem: p.to_string(),
                n,
            })?;
            vals.push(v);
        }
        let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
        for (&s, v) in solvers.iter().zip(vals) {
            let r = if best.is_finite() && v.is_finite() { v / best } else { f64::INFINITY };
            ratios.get_mut(s).unwrap().push(r);
        }
    }
    let mut alphas: Vec<f64> = ratios.values().flatten().copied().filter(|r| r.is_finite()).collect();
    alphas.push(1.0);
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    Ok(ratios
        .into_iter()
        .map(|(s, mut r)| {
            r.sort_by(f64::total_cmp);
            let mut c = ProfileCurve { solver: s.to_string(), ratios: r, samples: Vec::new() };
            c.samples = alphas.iter().map(|&a| (a, c.rho(a))).collect();
            c
        })
        .collect())
}

/// Share of problems on which `solver` is best or tied.
pub fn best_or_tied(records: &[RunRecord], solver: &str, metric: Metric, policy: CapPolicy) -> Result<(usize, usize), BenchError> {
    let curves = make_profile(records, metric, policy)?;
    let c = curves.iter().find(|c| c.solver == solver).ok_or_else(|| BenchError::MissingPair {
        solver: solver.to_string(),
        problem: String::new(),
        n: 0,
    })?;
    Ok((c.wins(), c.ratios.len()))
}

const REFERENCE_HEADER: [&str; 6] = ["solver", "problem", "n", "terminate", "first_opt", "capped"];

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

fn check_header<R: Read>(rd: &mut csv::Reader<R>, want: &[&str]) -> Result<(), BenchError> {
    let line = rd.position().line();
    let h = rd.headers()?.clone();
    if h.iter().ne(want.iter().copied()) {
        return Err(BenchError::SchemaMismatch {
            line: rd.position().line().max(line),
            message: format!("header {:?}, expected {:?}", h.iter().collect::<Vec<_>>(), want),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, BenchError> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(i).ok_or_else(|| BenchError::SchemaMismatch { line, message: format!("missing {name}") })?;
    raw.parse().map_err(|_| BenchError::SchemaMismatch { line, message: format!("bad {name} {raw:?}") })
}

/// Read reference counts (`solver,problem,n,terminate,first_opt,capped`).
pub fn ingest_reference<R: Read>(input: R) -> Result<Vec<RunRecord>, BenchError> {
    let mut rd = reader(input);
    check_header(&mut rd, &REFERENCE_HEADER)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            BenchError::SchemaMismatch { line, message: e.to_string() }
        })?;
        let capped: u8 = field(&rec, 5, "capped")?;
        if capped > 1 {
            let line = rec.position().map_or(0, |p| p.line());
            return Err(BenchError::SchemaMismatch { line, message: "capped must be 0 or 1".into() });
        }
        out.push(RunRecord {
            solver: field(&rec, 0, "solver")?,
            problem: field(&rec, 1, "problem")?,
            n: field(&rec, 2, "n")?,
            terminate: field(&rec, 3, "terminate")?,
            first_opt: Some(field(&rec, 4, "first_opt")?),
            certified: false,
            capped: capped == 1,
            external: true,
            wall_seconds: 0.0,
            cut_stats: Vec::new(),
            error: None,
        });
    }
    Ok(out)
}

/// The shipped reference counts for all 24 instances.
pub fn reference_records() -> Vec<RunRecord> {
    ingest_reference(include_str!("../fixtures/reference_counts.csv").as_bytes()).expect("shipped fixture parses")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replication {
    pub n: usize,
    pub replication: usize,
    pub problem: String,
    pub terminate: usize,
    pub first_opt: usize,
}

/// Read per-replication counts (`n,replication,problem,terminate,first_opt`).
pub fn ingest_replications<R: Read>(input: R) -> Result<Vec<Replication>, BenchError> {
    let mut rd = reader(input);
    check_header(&mut rd, &["n", "replication", "problem", "terminate", "first_opt"])?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        out.push(Replication {
            n: field(&rec, 0, "n")?,
            replication: field(&rec, 1, "replication")?,
            problem: field(&rec, 2, "problem")?,
            terminate: field(&rec, 3, "terminate")?,
            first_opt: field(&rec, 4, "first_opt")?,
        });
    }
    Ok(out)
}

pub fn shipped_replications() -> Vec<Replication> {
    ingest_replications(include_str!("../fixtures/matsumoto_replications.csv").as_bytes())
        .expect("shipped fixture parses")
}

/// Floor of the mean terminate and first-optimum counts per `(problem, n)`.
pub fn floor_means(reps: &[Replication]) -> BTreeMap<(String, usize), (usize, usize)> {
    let mut acc: BTreeMap<(String, usize), (usize, usize, usize)> = BTreeMap::new();
    for r in reps {
        let e = acc.entry((r.problem.clone(), r.n)).or_default();
        e.0 += r.terminate;
        e.1 += r.first_opt;
        e.2 += 1;
    }
    acc.into_iter().map(|(k, (t, f, c))| (k, (t / c, f / c))).collect()
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}

/// `solver,problem,n,N,ratio` rows sorted by problem, n and solver.
pub fn write_metric_csv<W: Write>(records: &[RunRecord], metric: Metric, policy: CapPolicy, out: W) -> Result<(), BenchError> {
    make_profile(records, metric, policy)?;
    let mut min: BTreeMap<(&str, usize), f64> = BTreeMap::new();
    for r in records {
        let e = min.entry((&r.problem, r.n)).or_insert(f64::INFINITY);
        *e = e.min(r.value(metric, policy));
    }
    let mut rows: Vec<&RunRecord> = records.iter().collect();
    rows.sort_by(|a, b| (&a.problem, a.n, &a.solver).cmp(&(&b.problem, b.n, &b.solver)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver", "problem", "n", "N", "ratio"])?;
    for r in rows {
        let v = r.value(metric, policy);
        let best = min[&(r.problem.as_str(), r.n)];
        let ratio = if v.is_finite() && best.is_finite() { v / best } else { f64::INFINITY };
        w.write_record([r.solver.clone(), r.problem.clone(), r.n.to_string(), fmt_value(v), fmt_value(ratio)])?;
    }
    w.flush()?;
    Ok(())
}

/// `solver,alpha,rho` samples of each curve.
pub fn write_profile_csv<W: Write>(curves: &[ProfileCurve], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver", "alpha", "rho"])?;
    for c in curves {
        for &(a, rho) in &c.samples {
            w.write_record([c.solver.clone(), fmt_value(a), format!("{rho}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per record, without timings so reruns compare byte for byte.
pub fn write_records_csv<W: Write>(records: &[RunRecord], out: W) -> Result<(), BenchError> {
    let mut rows: Vec<&RunRecord> = records.iter().collect();
    rows.sort_by(|a, b| (&a.solver, a.n, &a.problem).cmp(&(&b.solver, b.n, &b.problem)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver", "problem", "n", "terminate", "first_opt", "certified", "capped", "external", "error"])?;
    for r in rows {
        w.write_record([
            r.solver.clone(),
            r.problem.clone(),
            r.n.to_string(),
            r.terminate.to_string(),
            r.first_opt.map_or(String::new(), |v| v.to_string()),
            r.certified.to_string(),
            r.capped.to_string(),
            r.external.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
