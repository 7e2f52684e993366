//! The main loop: evaluate, cut, bound, pick the next point.
//!
//! Each iteration runs an update phase over the candidate combinations of a
//! source set of evaluated points, recomputes the active set and the lower
//! bound, and stops when the active set is empty, i.e. every unevaluated
//! point has a lower bound at least the incumbent value. Variants differ in
//! which evaluated points feed the update phase (generators or everything)
//! and in how the next point is chosen.
//!
//! # Combination bookkeeping
//!
//! A combination's cut only depends on its points, and the active set only
//! shrinks, so a combination never needs to be applied twice. Each pass
//! therefore only enumerates combinations that contain a point absent from
//! the previous pass's source set; everything else was already applied.

use std::collections::HashSet;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{SimplexKernel, MEMBERSHIP_TOL, POISED_TOL};
use crate::lattice::{linf, Domain, LatticePoint};
use crate::scan::{ActiveTree, CutScan, ScanBuffers};
use crate::problems::{CountingOracle, Objective, ProblemError};
use crate::underestimator::{
    generator_set, init_table, refresh_active, table_min, ActiveSet, EtaTable, TableError, DEFAULT_MEMORY_BUDGET,
};

/// Absolute tolerance for `l = u`.
pub const BOUND_TOL: f64 = 1e-9;

const BATCH: usize = 1024;
const CACHE_LIMIT: usize = 4_000_000;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("initial point {0} is outside the domain; move the start point away from the boundary")]
    StencilOutsideDomain(LatticePoint),
    #[error("objective has dimension {objective}, domain has {domain}")]
    DimensionMismatch { objective: usize, domain: usize },
    #[error("need at least one initial point")]
    NoInitialPoints,
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Variant {
    #[serde(rename = "SUCIL")]
    Sucil,
    #[serde(rename = "SUCIL-noTR")]
    SucilNoTr,
    #[serde(rename = "SUCIL-ideal1")]
    SucilIdeal1,
    #[serde(rename = "SUCIL-ideal2")]
    SucilIdeal2,
    /// All evaluated points, global minimizer of the bound.
    #[serde(rename = "framework")]
    Framework,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Sucil, Variant::SucilNoTr, Variant::SucilIdeal1, Variant::SucilIdeal2, Variant::Framework];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sucil => "SUCIL",
            Variant::SucilNoTr => "SUCIL-noTR",
            Variant::SucilIdeal1 => "SUCIL-ideal1",
            Variant::SucilIdeal2 => "SUCIL-ideal2",
            Variant::Framework => "framework",
        }
    }

    /// Accepts the display names and short forms like `noTR` or `ideal1`.
    pub fn parse(s: &str) -> Option<Variant> {
        let s = s.to_ascii_lowercase();
        let s = s.strip_prefix("sucil-").or_else(|| s.strip_prefix("sucil_")).unwrap_or(&s);
        Some(match s {
            "sucil" | "tr" => Variant::Sucil,
            "notr" => Variant::SucilNoTr,
            "ideal1" => Variant::SucilIdeal1,
            "ideal2" => Variant::SucilIdeal2,
            "framework" => Variant::Framework,
            _ => return None,
        })
    }

    pub fn point_set(self) -> PointSet {
        match self {
            Variant::SucilIdeal1 | Variant::Framework => PointSet::All,
            _ => PointSet::Generators,
        }
    }

    pub fn next_iterate(self) -> NextIterate {
        match self {
            Variant::Sucil => NextIterate::TrustRegion,
            Variant::SucilNoTr | Variant::Framework => NextIterate::GlobalBound,
            Variant::SucilIdeal1 | Variant::SucilIdeal2 => NextIterate::Oracle,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which evaluated points the update phase combines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointSet {
    Generators,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NextIterate {
    /// Minimize the bound inside the trust region around the incumbent.
    TrustRegion,
    /// Minimize the bound over the whole active set.
    GlobalBound,
    /// Minimize the true objective over the active set.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub poised: f64,
    pub membership: f64,
    pub bound: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { poised: POISED_TOL, membership: MEMBERSHIP_TOL, bound: BOUND_TOL }
    }
}

#[derive(Debug, Clone)]
pub struct VariantConfig {
    pub variant: Variant,
    pub point_set: PointSet,
    pub next_iterate: NextIterate,
    pub delta_min: i64,
    /// Evaluation budget; `None` means `|Ω|`.
    pub budget: Option<usize>,
    /// Center of the initial stencil; `None` means the box midpoint.
    pub start: Option<LatticePoint>,
    /// Explicit initial points, replacing the stencil.
    pub initial_points: Option<Vec<LatticePoint>>,
    pub tol: Tolerances,
    pub parallel: bool,
    pub memory_budget: usize,
}

impl VariantConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            point_set: variant.point_set(),
            next_iterate: variant.next_iterate(),
            delta_min: 1,
            budget: None,
            start: None,
            initial_points: None,
            tol: Tolerances::default(),
            parallel: true,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn with_start(mut self, x: LatticePoint) -> Self {
        self.start = Some(x);
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn with_initial_points(mut self, pts: Vec<LatticePoint>) -> Self {
        self.initial_points = Some(pts);
        self
    }
}

/// Counters for one update phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CutStats {
    /// Combinations examined (excluding cache hits).
    pub total: u64,
    /// Combinations skipped because they were already applied.
    pub cache_hits: u64,
    pub poised: u64,
    /// Cuts exceeding the phase-start bound at some active point of their
    /// cone union.
    pub updating: u64,
    /// Updating cuts reaching the incumbent value at such a point.
    pub pruning: u64,
    /// Strict improvements written to the table.
    pub raised: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub source_points: usize,
    pub new_points: usize,
    pub stats: CutStats,
    pub active: usize,
    #[serde(serialize_with = "bound_json")]
    pub lower: f64,
    #[serde(serialize_with = "bound_json")]
    pub upper: f64,
    pub delta: i64,
    pub next: Option<LatticePoint>,
}

/// Infinite bounds become the strings "inf" and "-inf".
fn bound_json<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Certified,
    BudgetExhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub variant: Variant,
    pub problem: String,
    pub n: usize,
    pub lower_bounds: Vec<i64>,
    pub upper_bounds: Vec<i64>,
    pub start: Option<LatticePoint>,
    pub status: Status,
    pub x_best: LatticePoint,
    pub f_best: f64,
    #[serde(serialize_with = "bound_json")]
    pub lower: f64,
    #[serde(serialize_with = "bound_json")]
    pub upper: f64,
    pub evaluations: usize,
    /// 1-based index of the first evaluation attaining `f_best`.
    pub first_opt_eval: usize,
    pub evaluated: Vec<(LatticePoint, f64)>,
    pub iterations: Vec<IterationRecord>,
}

impl Certificate {
    pub fn certified(&self) -> bool {
        self.status == Status::Certified
    }
}

/// What an observer sees after each update phase.
pub struct IterationView<'a> {
    pub iteration: usize,
    pub domain: &'a Domain,
    pub table: &'a EtaTable,
    pub active: &'a ActiveSet,
    /// Per point of the domain.
    pub evaluated: &'a [bool],
    pub log: &'a [(LatticePoint, f64)],
    pub lower: f64,
    pub upper: f64,
}

/// `{x̄} ∪ {x̄ ± e_i}`.
pub fn initial_stencil(center: &LatticePoint, dom: &Domain) -> Result<Vec<LatticePoint>, SolveError> {
    let mut pts = vec![center.clone()];
    for i in 0..center.dim() {
        pts.push(center.offset(i, 1));
        pts.push(center.offset(i, -1));
    }
    match pts.iter().find(|p| !dom.contains(p.coords())) {
        Some(p) => Err(SolveError::StencilOutsideDomain(p.clone())),
        None => Ok(pts),
    }
}

pub fn step_radius(delta: i64, delta_min: i64, improved: bool) -> i64 {
    if improved {
        delta + 1
    } else {
        delta_min.max(delta / 2)
    }
}

/// Trust-region pick: grow `delta` until the ball around `center` meets the
/// active set, then minimize `eta` inside it. Returns the domain index and
/// the (possibly grown) radius.
pub fn next_iterate_tr(
    dom: &Domain,
    table: &EtaTable,
    active: &ActiveSet,
    center: &[i64],
    delta: i64,
) -> Result<(usize, i64), TableError> {
    let dist = |i: u32| linf(dom.point_slice(i as usize), center);
    let nearest = active.indices().iter().map(|&i| dist(i)).min().ok_or(TableError::EmptyActiveSet)?;
    let delta = delta.max(nearest);
    let mut best: Option<(f64, usize)> = None;
    for &i in active.indices() {
        if dist(i) <= delta {
            let v = table.eta(i as usize);
            if best.map_or(true, |(b, _)| v < b) {
                best = Some((v, i as usize));
            }
        }
    }
    Ok((best.expect("ball meets active set").1, delta))
}

/// Exhaustive minimum and every minimizer, in enumeration order.
pub fn brute_force_oracle(f: &dyn Objective, dom: &Domain, limit: usize) -> Result<(f64, Vec<LatticePoint>), TableError> {
    if dom.len() > limit {
        return Err(TableError::CapacityExceeded { points: dom.len(), bytes: 0, budget: limit });
    }
    let vals: Vec<f64> = dom.iter().map(|x| f.eval(x)).collect();
    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let arg = vals.iter().enumerate().filter(|(_, &v)| v == best).map(|(i, _)| dom.point(i)).collect();
    Ok((best, arg))
}

pub fn solve(f: &dyn Objective, dom: &Domain, cfg: &VariantConfig) -> Result<Certificate, SolveError> {
    solve_observed(f, dom, cfg, |_| {})
}

/// Like [`solve`], calling `observe` after every update phase.
pub fn solve_observed(
    f: &dyn Objective,
    dom: &Domain,
    cfg: &VariantConfig,
    mut observe: impl FnMut(&IterationView<'_>),
) -> Result<Certificate, SolveError> {
    if f.dim() != dom.dim() {
        return Err(SolveError::DimensionMismatch { objective: f.dim(), domain: dom.dim() });
    }
    let start = match (&cfg.initial_points, &cfg.start) {
        (Some(_), _) => None,
        (None, Some(x)) => Some(x.clone()),
        (None, None) => Some(dom.midpoint()),
    };
    let initial = match &cfg.initial_points {
        Some(p) => p.clone(),
        None => initial_stencil(start.as_ref().unwrap(), dom)?,
    };
    if initial.is_empty() {
        return Err(SolveError::NoInitialPoints);
    }
    if let Some(p) = initial.iter().find(|p| !dom.contains(p.coords())) {
        return Err(SolveError::StencilOutsideDomain(p.clone()));
    }

    let mut run = Run::new(f, dom, cfg)?;
    let budget = cfg.budget.unwrap_or(dom.len());
    let mut exhausted = false;
    for p in &initial {
        if run.oracle.count() >= budget {
            exhausted = true;
            break;
        }
        run.evaluate(dom.index_of(p.coords()).unwrap())?;
    }

    let mut iterations = Vec::new();
    let mut delta = cfg.delta_min.max(1);
    let mut k = 0;
    let lower;
    loop {
        run.refresh();
        let (source, fresh) = run.source_set();
        let stats = run.update_phase(&source, &fresh);
        run.refresh();
        let l = if run.active.is_empty() { run.u } else { table_min(&run.table, &run.active)?.0 };
        observe(&IterationView {
            iteration: k,
            domain: dom,
            table: &run.table,
            active: &run.active,
            evaluated: &run.evaluated,
            log: run.oracle.log(),
            lower: l,
            upper: run.u,
        });
        let mut rec = IterationRecord {
            iteration: k,
            source_points: source.len(),
            new_points: fresh.len(),
            stats,
            active: run.active.len(),
            lower: l,
            upper: run.u,
            delta,
            next: None,
        };
        if run.active.is_empty() {
            lower = l;
            iterations.push(rec);
            break;
        }
        if exhausted || run.oracle.count() >= budget {
            exhausted = true;
            lower = l;
            iterations.push(rec);
            break;
        }
        let next = match cfg.next_iterate {
            NextIterate::TrustRegion => {
                let (i, d) = next_iterate_tr(dom, &run.table, &run.active, run.x_best(), delta)?;
                delta = d;
                rec.delta = d;
                i
            }
            NextIterate::GlobalBound => table_min(&run.table, &run.active)?.1,
            NextIterate::Oracle => run.oracle_argmin(),
        };
        rec.next = Some(dom.point(next));
        iterations.push(rec);
        let improved = run.evaluate(next)?;
        delta = step_radius(delta, cfg.delta_min, improved);
        k += 1;
    }

    let log = run.oracle.log().to_vec();
    let first_opt_eval = log.iter().position(|(_, v)| *v <= run.u + cfg.tol.bound).map_or(0, |p| p + 1);
    Ok(Certificate {
        variant: cfg.variant,
        problem: f.name().to_string(),
        n: dom.dim(),
        lower_bounds: dom.lower().to_vec(),
        upper_bounds: dom.upper().to_vec(),
        start,
        status: if exhausted { Status::BudgetExhausted } else { Status::Certified },
        x_best: log[run.best].0.clone(),
        f_best: run.u,
        lower: if exhausted { lower } else { run.u },
        upper: run.u,
        evaluations: log.len(),
        first_opt_eval,
        evaluated: log,
        iterations,
    })
}

struct Run<'a> {
    dom: &'a Domain,
    cfg: &'a VariantConfig,
    oracle: CountingOracle<'a>,
    /// Evaluated points as floats, row-major by evaluation id.
    pts: Vec<f64>,
    fvals: Vec<f64>,
    omega: Vec<u32>,
    evaluated: Vec<bool>,
    table: EtaTable,
    active: ActiveSet,
    u: f64,
    best: usize,
    /// Membership of each evaluation id in the previous source set.
    in_prev: Vec<bool>,
    fresh: Vec<u32>,
    cache: Option<HashSet<u128>>,
    /// True objective over the domain, for the oracle next-iterate rule.
    truth: Option<Vec<f64>>,
}

impl<'a> Run<'a> {
    fn new(f: &'a dyn Objective, dom: &'a Domain, cfg: &'a VariantConfig) -> Result<Self, SolveError> {
        let table = init_table(dom, cfg.memory_budget)?;
        let truth = (cfg.next_iterate == NextIterate::Oracle).then(|| dom.iter().map(|x| f.eval(x)).collect());
        let cache = (cfg.point_set == PointSet::Generators && dom.dim() <= 5).then(HashSet::new);
        Ok(Self {
            dom,
            cfg,
            oracle: CountingOracle::new(f),
            pts: Vec::new(),
            fvals: Vec::new(),
            omega: Vec::new(),
            evaluated: vec![false; dom.len()],
            table,
            active: ActiveSet::all(dom),
            u: f64::INFINITY,
            best: 0,
            in_prev: Vec::new(),
            fresh: Vec::new(),
            cache,
            truth,
        })
    }

    /// Evaluate domain point `i`; returns whether the incumbent improved.
    fn evaluate(&mut self, i: usize) -> Result<bool, SolveError> {
        let x = self.dom.point(i);
        let v = self.oracle.evaluate(&x)?;
        let id = self.fvals.len() as u32;
        self.pts.extend(x.coords().iter().map(|&c| c as f64));
        self.fvals.push(v);
        self.omega.push(i as u32);
        self.evaluated[i] = true;
        self.in_prev.push(false);
        self.fresh.push(id);
        let improved = v < self.u;
        if improved {
            self.u = v;
            self.best = id as usize;
        }
        Ok(improved)
    }

    fn x_best(&self) -> &[i64] {
        self.dom.point_slice(self.omega[self.best] as usize)
    }

    fn refresh(&mut self) {
        self.active = refresh_active(&self.table, &self.evaluated, self.u - self.cfg.tol.bound);
    }

    fn oracle_argmin(&self) -> usize {
        let truth = self.truth.as_ref().expect("oracle values");
        let mut best: Option<(f64, usize)> = None;
        for &i in self.active.indices() {
            let v = truth[i as usize];
            if best.map_or(true, |(b, _)| v < b) {
                best = Some((v, i as usize));
            }
        }
        best.expect("active set nonempty").1
    }

    /// Source set for this pass (sorted ids) and the ids new to it.
    fn source_set(&mut self) -> (Vec<u32>, Vec<u32>) {
        let first = self.in_prev.iter().all(|b| !b);
        let mut source: Vec<u32> = if first || self.cfg.point_set == PointSet::All {
            (0..self.fvals.len() as u32).collect()
        } else {
            let mut s = generator_set(&self.table, &self.active);
            s.extend(self.fresh.iter().copied());
            s.into_iter().collect()
        };
        source.sort_unstable();
        let fresh: Vec<u32> = source.iter().copied().filter(|&id| !self.in_prev[id as usize]).collect();
        self.in_prev.iter_mut().for_each(|b| *b = false);
        for &id in &source {
            self.in_prev[id as usize] = true;
        }
        self.fresh.clear();
        (source, fresh)
    }

    fn update_phase(&mut self, source: &[u32], fresh: &[u32]) -> CutStats {
        let t0 = Instant::now();
        let n = self.dom.dim();
        let m = n + 1;
        let mut stats = CutStats::default();
        if source.len() < m || fresh.is_empty() || self.active.is_empty() {
            stats.wall_seconds = t0.elapsed().as_secs_f64();
            return stats;
        }
        let tree = ActiveTree::build(self.dom, self.active.indices(), &self.table);
        let ctx = ScanCtx {
            m,
            pts: &self.pts,
            fvals: &self.fvals,
            tree: &tree,
            poised_tol: self.cfg.tol.poised,
            member_tol: self.cfg.tol.membership,
            prune_at: self.u - self.cfg.tol.bound,
        };
        let is_new: Vec<bool> = {
            let mut v = vec![false; self.fvals.len()];
            fresh.iter().for_each(|&id| v[id as usize] = true);
            source.iter().map(|&id| v[id as usize]).collect()
        };
        let mut combos = Combinations::new(source.len(), m, is_new);
        let mut batch: Vec<u32> = Vec::with_capacity(BATCH * m);
        let mut cur = vec![0usize; m];
        loop {
            batch.clear();
            while batch.len() < BATCH * m && combos.next_into(&mut cur) {
                let ids = cur.iter().map(|&p| source[p]);
                if let Some(cache) = self.cache.as_mut() {
                    let key = fingerprint(ids.clone());
                    if cache.contains(&key) {
                        stats.cache_hits += 1;
                        continue;
                    }
                    if cache.len() < CACHE_LIMIT {
                        cache.insert(key);
                    }
                }
                batch.extend(ids);
            }
            if batch.is_empty() {
                break;
            }
            let cur_eta = self.table.values();
            let outcomes: Vec<ComboOutcome> = if self.cfg.parallel {
                batch
                    .par_chunks_exact(m)
                    .map_init(|| Scratch::new(n), |s, ids| ctx.process(s, ids, cur_eta))
                    .collect()
            } else {
                let mut s = Scratch::new(n);
                batch.chunks_exact(m).map(|ids| ctx.process(&mut s, ids, cur_eta)).collect()
            };
            for (ids, o) in batch.chunks_exact(m).zip(&outcomes) {
                stats.total += 1;
                stats.poised += o.poised as u64;
                stats.updating += o.scan.updating as u64;
                stats.pruning += o.scan.pruning as u64;
                for &(p, v) in &o.scan.hits {
                    stats.raised += self.table.raise_at(tree.idx[p as usize] as usize, v, ids) as u64;
                }
            }
        }
        stats.wall_seconds = t0.elapsed().as_secs_f64();
        stats
    }
}

fn fingerprint(ids: impl Iterator<Item = u32>) -> u128 {
    ids.fold(0u128, |acc, id| (acc << 21) | (id as u128 + 1))
}

struct Scratch {
    kernel: SimplexKernel,
    secant: Vec<f64>,
    facets: Vec<f64>,
    fv: Vec<f64>,
    buf: ScanBuffers,
}

impl Scratch {
    fn new(n: usize) -> Self {
        let m = n + 1;
        Self {
            kernel: SimplexKernel::new(n),
            secant: vec![0.0; m],
            facets: vec![0.0; m * m],
            fv: vec![0.0; m],
            buf: ScanBuffers::default(),
        }
    }
}

#[derive(Default)]
struct ComboOutcome {
    poised: bool,
    scan: CutScan,
}

struct ScanCtx<'a> {
    m: usize,
    pts: &'a [f64],
    fvals: &'a [f64],
    tree: &'a ActiveTree,
    poised_tol: f64,
    member_tol: f64,
    prune_at: f64,
}

impl ScanCtx<'_> {
    fn process(&self, s: &mut Scratch, ids: &[u32], cur_eta: &[f64]) -> ComboOutcome {
        let n = self.m - 1;
        let mut out = ComboOutcome::default();
        let pts = ids.iter().map(|&id| &self.pts[id as usize * n..(id as usize + 1) * n]);
        if !s.kernel.factor(pts, self.poised_tol) {
            return out;
        }
        out.poised = true;
        for (f, &id) in s.fv.iter_mut().zip(ids) {
            *f = self.fvals[id as usize];
        }
        s.kernel.secant(&s.fv, &mut s.secant);
        if !self.tree.root_may_update(&s.secant) {
            return out;
        }
        s.kernel.facets(&mut s.facets);
        self.tree.scan(&s.secant, &s.facets, self.member_tol, cur_eta, self.prune_at, &mut s.buf, &mut out.scan);
        out
    }
}

/// Lexicographic `k`-subsets of `0..len` containing at least one position
/// flagged in `is_new`.
struct Combinations {
    len: usize,
    k: usize,
    /// `any_new_from[i]`: whether some flagged position is `>= i`.
    any_new_from: Vec<bool>,
    /// Number of flagged positions among `cur[..d]`, per depth.
    new_count: Vec<usize>,
    is_new: Vec<bool>,
    cur: Vec<usize>,
    started: bool,
    done: bool,
}

impl Combinations {
    fn new(len: usize, k: usize, is_new: Vec<bool>) -> Self {
        let mut any_new_from = vec![false; len + 1];
        for i in (0..len).rev() {
            any_new_from[i] = is_new[i] || any_new_from[i + 1];
        }
        Self {
            len,
            k,
            any_new_from,
            new_count: vec![0; k + 1],
            is_new,
            cur: vec![0; k],
            started: false,
            done: k == 0 || len < k,
        }
    }

    /// Can slots `d..k` be filled from positions `>= from` so that the
    /// subset contains a flagged position?
    fn feasible(&self, d: usize, from: usize) -> bool {
        from <= self.len && self.len - from >= self.k - d && (self.new_count[d] > 0 || self.any_new_from[from])
    }

    /// Place `cur[d] = v` and fill the rest with the smallest feasible
    /// continuation. Returns false if none exists.
    fn fill_from(&mut self, d: usize, mut v: usize) -> bool {
        if d == self.k {
            return self.new_count[d] > 0;
        }
        while self.feasible(d, v) {
            self.cur[d] = v;
            self.new_count[d + 1] = self.new_count[d] + self.is_new[v] as usize;
            if self.fill_from(d + 1, v + 1) {
                return true;
            }
            v += 1;
        }
        false
    }

    fn next_into(&mut self, out: &mut [usize]) -> bool {
        if self.done {
            return false;
        }
        let ok = if !self.started {
            self.started = true;
            self.fill_from(0, 0)
        } else {
            let mut ok = false;
            for d in (0..self.k).rev() {
                let v = self.cur[d] + 1;
                if self.fill_from(d, v) {
                    ok = true;
                    break;
                }
            }
            ok
        };
        if ok {
            out.copy_from_slice(&self.cur);
        } else {
            self.done = true;
        }
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{FnObjective, ProblemSpec};

    fn all_with_new(len: usize, k: usize, is_new: &[bool]) -> Vec<Vec<usize>> {
        let mut c = Combinations::new(len, k, is_new.to_vec());
        let mut out = Vec::new();
        let mut cur = vec![0; k];
        while c.next_into(&mut cur) {
            out.push(cur.clone());
        }
        out
    }

    fn brute(len: usize, k: usize, is_new: &[bool]) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for mask in 0u32..(1 << len) {
            if mask.count_ones() as usize == k {
                let v: Vec<usize> = (0..len).filter(|i| mask >> i & 1 == 1).collect();
                if v.iter().any(|&i| is_new[i]) {
                    out.push(v);
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn combinations_match_filtered_brute_force() {
        for len in 0..9 {
            for k in 1..5 {
                for pattern in 0u32..(1 << len) {
                    let is_new: Vec<bool> = (0..len).map(|i| pattern >> i & 1 == 1).collect();
                    assert_eq!(all_with_new(len, k, &is_new), brute(len, k, &is_new), "len {len} k {k} {is_new:?}");
                }
            }
        }
    }

    #[test]
    fn stencil_examples() {
        let dom = Domain::cube(2, -4, 4).unwrap();
        let s = initial_stencil(&LatticePoint(vec![0, 0]), &dom).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.contains(&LatticePoint(vec![-1, 0])) && s.contains(&LatticePoint(vec![0, 1])));
        let dom3 = Domain::cube(3, -4, 4).unwrap();
        assert_eq!(initial_stencil(&LatticePoint(vec![0, 0, 0]), &dom3).unwrap().len(), 7);
        assert!(matches!(
            initial_stencil(&LatticePoint(vec![4, 4, 4]), &dom3),
            Err(SolveError::StencilOutsideDomain(p)) if p.0 == vec![5, 4, 4]
        ));
    }

    #[test]
    fn radius_steps() {
        assert_eq!(step_radius(4, 1, false), 2);
        assert_eq!(step_radius(1, 1, false), 1);
        assert_eq!(step_radius(3, 1, true), 4);
        assert_eq!(step_radius(5, 1, false), 2);
    }

    #[test]
    fn trust_region_pick() {
        let dom = Domain::cube(1, -4, 4).unwrap();
        let t = init_table(&dom, DEFAULT_MEMORY_BUDGET).unwrap();
        // equal bounds at distance 1 and 3: the closer point wins
        let act = ActiveSet::from_indices(vec![dom.index_of(&[1]).unwrap() as u32, dom.index_of(&[-3]).unwrap() as u32]);
        let (i, d) = next_iterate_tr(&dom, &t, &act, &[0], 1).unwrap();
        assert_eq!((dom.point_slice(i), d), (&[1][..], 1));
        // single far point: radius grows to reach it
        let act = ActiveSet::from_indices(vec![dom.index_of(&[4]).unwrap() as u32]);
        let (i, d) = next_iterate_tr(&dom, &t, &act, &[0], 1).unwrap();
        assert_eq!((dom.point_slice(i), d), (&[4][..], 4));
        // uniform bound: first in enumeration order inside the ball
        let (i, _) = next_iterate_tr(&dom, &t, &ActiveSet::all(&dom), &[0], 2).unwrap();
        assert_eq!(dom.point_slice(i), &[-2]);
        assert_eq!(next_iterate_tr(&dom, &t, &ActiveSet::default(), &[0], 1), Err(TableError::EmptyActiveSet));
    }

    #[test]
    fn one_dimensional_square() {
        let dom = Domain::cube(1, -4, 4).unwrap();
        let f = FnObjective::new("sq", 1, |x: &[i64]| (x[0] * x[0]) as f64);
        for v in Variant::ALL {
            let c = solve(&f, &dom, &VariantConfig::new(v)).unwrap();
            assert!(c.certified());
            assert_eq!((c.f_best, c.lower, c.x_best.0.clone()), (0.0, 0.0, vec![0]));
        }
    }

    #[test]
    fn brute_force_quad() {
        let dom = Domain::cube(3, -4, 4).unwrap();
        let (v, arg) = brute_force_oracle(&ProblemSpec::new("quad", 3).unwrap(), &dom, 1 << 20).unwrap();
        assert_eq!((v, arg), (0.0, vec![LatticePoint(vec![2, 2, 2])]));
    }

    #[test]
    fn budget_stops_uncertified() {
        let dom = Domain::cube(3, -4, 4).unwrap();
        let f = ProblemSpec::new("quad", 3).unwrap();
        let c = solve(&f, &dom, &VariantConfig::new(Variant::Sucil).with_budget(1)).unwrap();
        assert_eq!(c.status, Status::BudgetExhausted);
        assert_eq!(c.evaluations, 1);
    }

    #[test]
    fn variant_names_parse() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.name()), Some(v));
        }
        assert_eq!(Variant::parse("noTR"), Some(Variant::SucilNoTr));
        assert_eq!(Variant::parse("ideal2"), Some(Variant::SucilIdeal2));
        assert_eq!(Variant::parse("bogus"), None);
    }
}
