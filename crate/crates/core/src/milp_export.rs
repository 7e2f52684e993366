//! The CPF mixed-integer model of the piecewise linear bound.
//!
//! Every poised `(n+1)`-subset of the evaluated points contributes one
//! conditional cut `eta >= c^T x + b`, switched on by binaries `z` that say
//! which cone of the subset contains `x`. Cone membership is tied to the
//! multipliers `lam` of the cone's extreme rays, and the binaries `w` force
//! some multiplier strictly negative when `x` is outside.
//!
//! Constants come from integer facet normals: with integral `(c, b)` any
//! lattice point off a facet has `|c^T x + b| >= 1`. The multiplier of ray
//! `l` at a lattice point `x` equals `-(c_l^T x + b_l) / (c_l^T x^l + b_l)`,
//! where facet `l` passes through every point of the subset except `x^l`, so
//! the distance bounds translate into multiplier bounds by that scale.
//!
//! Models are written in the classic LP text format and can be read back by
//! [`parse_lp`]; [`validate_assignment`] checks a point against every row.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{check_poised, facet_halfspaces, fit_secant, Secant, POISED_TOL};
use crate::lattice::{Domain, LatticePoint};

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("no poised subset among {points} evaluated points")]
    NoPoisedSubset { points: usize },
    #[error("facet has a zero normal")]
    ZeroNormal,
    #[error("facet {facet} of cut {cut} could not be made integral")]
    Rationalization { cut: usize, facet: usize },
    #[error("assignment misses {} variable(s), first {}", .missing.len(), .missing[0])]
    IncompleteAssignment { missing: Vec<String> },
    #[error("point {0:?} has the wrong dimension")]
    DimensionMismatch(LatticePoint),
    #[error("LP parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Integral hyperplane `c^T x + b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerHyperplane {
    pub c: Vec<i64>,
    pub b: i64,
}

impl IntegerHyperplane {
    pub fn value(&self, x: &[i64]) -> i64 {
        self.c.iter().zip(x).map(|(c, v)| c * v).sum::<i64>() + self.b
    }

    pub fn norm(&self) -> f64 {
        self.c.iter().map(|&c| (c as f64).powi(2)).sum::<f64>().sqrt()
    }

    /// Largest `|c^T x + b|` over the box.
    pub fn max_abs_over(&self, dom: &Domain) -> f64 {
        let (mut hi, mut lo) = (self.b as f64, self.b as f64);
        for ((&c, &l), &u) in self.c.iter().zip(dom.lower()).zip(dom.upper()) {
            let (a, b) = ((c * l) as f64, (c * u) as f64);
            hi += a.max(b);
            lo += a.min(b);
        }
        hi.abs().max(lo.abs())
    }
}

/// Best rational approximation `p/q` of `x` by continued fractions.
pub fn rationalize(x: f64, tol: f64) -> Option<(i64, i64)> {
    const MAX_DEN: f64 = 1e12;
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0.0f64, 1.0f64);
    let (mut k0, mut k1) = (1.0f64, 0.0f64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > MAX_DEN {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 / k1).abs() <= tol {
            return Some((h1 as i64, k1 as i64));
        }
        let frac = r - a;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    ((x - h1 / k1).abs() <= tol).then_some((h1 as i64, k1 as i64))
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Integral facet through every point of `points` except `points[exclude]`,
/// oriented positive at the excluded point and reduced by the gcd.
pub fn integer_facet(points: &[LatticePoint], exclude: usize) -> Option<IntegerHyperplane> {
    let ps = check_poised(points, POISED_TOL).ok()?;
    let cc = facet_halfspaces(&ps);
    let h = &cc.halfspaces()[exclude];
    let mut fracs = Vec::with_capacity(h.normal.len() + 1);
    for &v in h.normal.iter().chain(std::iter::once(&h.offset)) {
        fracs.push(rationalize(v, 1e-9)?);
    }
    let mut lcm: i64 = 1;
    for &(_, q) in &fracs {
        lcm = lcm.checked_mul(q / gcd(lcm, q))?;
    }
    let mut coef: Vec<i64> = fracs.iter().map(|&(p, q)| p.checked_mul(lcm / q)).collect::<Option<_>>()?;
    let g = coef.iter().fold(0, |g, &v| gcd(g, v));
    if g == 0 {
        return None;
    }
    coef.iter_mut().for_each(|v| *v /= g);
    let b = coef.pop().unwrap();
    let hp = IntegerHyperplane { c: coef, b };
    let exact = points
        .iter()
        .enumerate()
        .all(|(l, p)| if l == exclude { hp.value(p.coords()) > 0 } else { hp.value(p.coords()) == 0 });
    exact.then_some(hp)
}

/// One conditional cut of the model.
#[derive(Debug, Clone)]
pub struct CpfCut {
    /// Indices into the evaluated points, ascending.
    pub ids: Vec<usize>,
    pub secant: Secant,
    /// `facets[l]` vanishes on every point of the cut except point `l`.
    pub facets: Vec<IntegerHyperplane>,
    /// `facets[l]` evaluated at point `l`; always positive.
    pub scale: Vec<i64>,
}

impl CpfCut {
    /// Barycentric coordinate of `x` for point `l`, computed exactly.
    pub fn barycentric(&self, l: usize, x: &[i64]) -> f64 {
        self.facets[l].value(x) as f64 / self.scale[l] as f64
    }
}

/// Every poised subset of an evaluated set.
#[derive(Debug, Clone)]
pub struct CutFamily {
    pub n: usize,
    pub points: Vec<LatticePoint>,
    pub fvals: Vec<f64>,
    pub cuts: Vec<CpfCut>,
}

impl CutFamily {
    pub fn enumerate(evaluated: &[(LatticePoint, f64)]) -> Result<Self, MilpError> {
        let n = evaluated.first().map_or(0, |(p, _)| p.dim());
        if let Some((p, _)) = evaluated.iter().find(|(p, _)| p.dim() != n) {
            return Err(MilpError::DimensionMismatch(p.clone()));
        }
        let points: Vec<LatticePoint> = evaluated.iter().map(|(p, _)| p.clone()).collect();
        let fvals: Vec<f64> = evaluated.iter().map(|(_, f)| *f).collect();
        let m = n + 1;
        let mut cuts = Vec::new();
        if n > 0 && points.len() >= m {
            let mut ids: Vec<usize> = (0..m).collect();
            loop {
                let sub: Vec<LatticePoint> = ids.iter().map(|&i| points[i].clone()).collect();
                if let Ok(ps) = check_poised(&sub, POISED_TOL) {
                    let fv: Vec<f64> = ids.iter().map(|&i| fvals[i]).collect();
                    let secant = fit_secant(&ps, &fv).map_err(|_| MilpError::NoPoisedSubset { points: points.len() })?;
                    let mut facets = Vec::with_capacity(m);
                    for l in 0..m {
                        let hp = integer_facet(&sub, l)
                            .ok_or(MilpError::Rationalization { cut: cuts.len(), facet: l })?;
                        facets.push(hp);
                    }
                    let scale = facets.iter().zip(&sub).map(|(h, p)| h.value(p.coords())).collect();
                    cuts.push(CpfCut { ids: ids.clone(), secant, facets, scale });
                }
                if !next_combination(&mut ids, points.len()) {
                    break;
                }
            }
        }
        if cuts.is_empty() {
            return Err(MilpError::NoPoisedSubset { points: points.len() });
        }
        Ok(Self { n, points, fvals, cuts })
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }
}

fn next_combination(ids: &mut [usize], len: usize) -> bool {
    let k = ids.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if ids[i] < len - k + i {
            ids[i] += 1;
            for j in i + 1..k {
                ids[j] = ids[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `M_i = max_box (c^T x + b) - l_f` for each cut, and their maximum.
pub fn derive_m_eta(cuts: &[Secant], dom: &Domain, l_f: f64) -> (Vec<f64>, f64) {
    let per: Vec<f64> = cuts
        .iter()
        .map(|s| {
            let mut v = s.b;
            for ((&c, &l), &u) in s.c.iter().zip(dom.lower()).zip(dom.upper()) {
                v += if c < 0.0 { c * l as f64 } else { c * u as f64 };
            }
            v - l_f
        })
        .collect();
    let max = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (per, max)
}

/// Smallest distance a lattice point off any facet can have: `min 1/||c||`.
pub fn derive_eps_lambda(facets: &[IntegerHyperplane]) -> Result<f64, MilpError> {
    let mut eps = f64::INFINITY;
    for f in facets {
        let norm = f.norm();
        if norm == 0.0 {
            return Err(MilpError::ZeroNormal);
        }
        eps = eps.min(1.0 / norm);
    }
    Ok(eps)
}

/// Largest distance from a facet to a point of the box.
pub fn derive_m_lambda(facets: &[IntegerHyperplane], dom: &Domain) -> f64 {
    facets
        .iter()
        .filter(|f| f.norm() > 0.0)
        .map(|f| f.max_abs_over(dom) / f.norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerBoundSource {
    /// Supplied by the caller, e.g. the minimum of the bound table.
    Supplied,
    /// Smallest observed value minus the largest possible secant drop over the box.
    Crude,
}

/// Big-M and tolerance constants of a model, multipliers in `lam` units.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantBundle {
    pub m_eta: f64,
    pub per_cut_m: Vec<f64>,
    pub eps_lambda: f64,
    pub m_lambda: f64,
    /// The same bounds in distance units, before scaling to multipliers.
    pub eps_distance: f64,
    pub m_distance: f64,
    pub l_f: f64,
    pub l_f_source: LowerBoundSource,
    /// Set when `eps_lambda` was overridden rather than derived.
    pub eps_overridden: bool,
}

impl ConstantBundle {
    pub fn derive(family: &CutFamily, dom: &Domain, l_f: Option<f64>) -> Result<Self, MilpError> {
        let (l_f, l_f_source) = match l_f {
            Some(v) => (v, LowerBoundSource::Supplied),
            None => (crude_lower_bound(family, dom), LowerBoundSource::Crude),
        };
        let secants: Vec<Secant> = family.cuts.iter().map(|c| c.secant.clone()).collect();
        let (per_cut_m, m_eta) = derive_m_eta(&secants, dom, l_f);
        let all: Vec<IntegerHyperplane> = family.cuts.iter().flat_map(|c| c.facets.iter().cloned()).collect();
        let eps_distance = derive_eps_lambda(&all)?;
        let m_distance = derive_m_lambda(&all, dom);
        let mut eps_lambda = f64::INFINITY;
        let mut lam_max: f64 = 0.0;
        for cut in &family.cuts {
            for (f, &s) in cut.facets.iter().zip(&cut.scale) {
                let s = s as f64;
                eps_lambda = eps_lambda.min(1.0 / s);
                lam_max = lam_max.max(f.max_abs_over(dom) / s);
            }
        }
        Ok(Self {
            m_eta,
            per_cut_m,
            eps_lambda,
            m_lambda: lam_max + eps_lambda,
            eps_distance,
            m_distance,
            l_f,
            l_f_source,
            eps_overridden: false,
        })
    }

    pub fn with_eps_lambda(mut self, eps: f64) -> Self {
        self.eps_lambda = eps;
        self.m_lambda = self.m_lambda.max(eps);
        self.eps_overridden = true;
        self
    }

    /// Key-value text describing where each constant came from.
    pub fn sidecar(&self) -> String {
        let mut s = String::new();
        let src = match self.l_f_source {
            LowerBoundSource::Supplied => "supplied",
            LowerBoundSource::Crude => "crude (min f - max ||c||_1 * box width)",
        };
        let _ = writeln!(s, "l_f = {}", fmt_num(self.l_f));
        let _ = writeln!(s, "l_f_source = {src}");
        let _ = writeln!(s, "m_eta = {}", fmt_num(self.m_eta));
        let _ = writeln!(s, "m_eta_source = closed form over box vertices per cut, max over cuts");
        let _ = writeln!(s, "eps_lambda = {}", fmt_num(self.eps_lambda));
        let eps_src = if self.eps_overridden { "override" } else { "integer facets, min 1/(c_l^T x^l + b_l)" };
        let _ = writeln!(s, "eps_lambda_source = {eps_src}");
        let _ = writeln!(s, "m_lambda = {}", fmt_num(self.m_lambda));
        let _ = writeln!(s, "m_lambda_source = integer facets, max over box vertices of |c^T x + b|/(c_l^T x^l + b_l), plus eps_lambda");
        let _ = writeln!(s, "eps_distance = {}", fmt_num(self.eps_distance));
        let _ = writeln!(s, "m_distance = {}", fmt_num(self.m_distance));
        let _ = writeln!(s, "distance_tightening = skipped");
        for (i, m) in self.per_cut_m.iter().enumerate() {
            let _ = writeln!(s, "m_cut_{i} = {}", fmt_num(*m));
        }
        s
    }
}

fn crude_lower_bound(family: &CutFamily, dom: &Domain) -> f64 {
    let fmin = family.fvals.iter().copied().fold(f64::INFINITY, f64::min);
    let width = dom.lower().iter().zip(dom.upper()).map(|(l, u)| u - l).max().unwrap_or(0) as f64;
    let c1 = family.cuts.iter().map(|c| c.secant.c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    fmin - c1 * width
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CpfOptions {
    /// Use the single `M_eta` in every cut row instead of the per-cut values.
    pub single_big_m: bool,
    /// Add the binary expansion of `x` and one no-good row per evaluated point.
    pub no_good: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    General,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A linear model with a minimization objective.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearModel {
    pub objective: Vec<(usize, f64)>,
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
}

impl LinearModel {
    fn add_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        self.variables.push(Variable { name, kind, lower, upper });
        self.variables.len() - 1
    }

    fn add_row(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        let terms = terms.into_iter().filter(|&(_, c)| c != 0.0).collect();
        self.rows.push(Row { name, terms, sense, rhs });
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

/// Sizes of a model by kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelCounts {
    pub binaries: usize,
    pub continuous: usize,
    pub integers: usize,
    pub rows: usize,
}

impl ModelCounts {
    /// Expected sizes for `cuts` cuts in dimension `n`. `values` is the number
    /// of lattice values per axis; it matters only with the no-good block.
    pub fn closed_form(n: usize, cuts: usize, evaluated: usize, values: &[usize], no_good: bool) -> Self {
        let m = n + 1;
        let mut c = Self {
            binaries: cuts * m * m,
            continuous: 1 + cuts * n * m,
            integers: n,
            rows: cuts * (2 + 3 * n * m + 2 * m),
        };
        if no_good {
            c.binaries += values.iter().sum::<usize>();
            c.rows += 2 * n + evaluated;
        }
        c
    }

    pub fn of(model: &LinearModel) -> Self {
        let count = |k| model.variables.iter().filter(|v| v.kind == k).count();
        Self {
            binaries: count(VarKind::Binary),
            continuous: count(VarKind::Continuous),
            integers: count(VarKind::General),
            rows: model.rows.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CpfModel {
    pub n: usize,
    pub cuts: usize,
    pub evaluated: usize,
    pub values_per_axis: Vec<usize>,
    pub options: CpfOptions,
    pub constants: ConstantBundle,
    pub linear: LinearModel,
}

impl CpfModel {
    pub fn counts(&self) -> ModelCounts {
        ModelCounts::of(&self.linear)
    }

    pub fn expected_counts(&self) -> ModelCounts {
        ModelCounts::closed_form(self.n, self.cuts, self.evaluated, &self.values_per_axis, self.options.no_good)
    }

    pub fn to_lp(&self) -> String {
        write_lp(&self.linear)
    }
}

pub fn build_cpf(family: &CutFamily, dom: &Domain, constants: &ConstantBundle, options: CpfOptions) -> CpfModel {
    let n = family.n;
    let m = n + 1;
    let mut lm = LinearModel::default();
    let eta = lm.add_var("eta".into(), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
    lm.objective.push((eta, 1.0));
    let x: Vec<usize> = (0..n)
        .map(|h| lm.add_var(format!("x_{h}"), VarKind::General, dom.lower()[h] as f64, dom.upper()[h] as f64))
        .collect();
    let (ml, el) = (constants.m_lambda, constants.eps_lambda);

    for (i, cut) in family.cuts.iter().enumerate() {
        let z: Vec<usize> = (0..m).map(|j| lm.add_var(format!("z_{i}_{j}"), VarKind::Binary, 0.0, 1.0)).collect();
        // w[j][l] and lam[j][l] for l != j, stored densely with usize::MAX on the diagonal
        let mut w = vec![vec![usize::MAX; m]; m];
        let mut lam = vec![vec![usize::MAX; m]; m];
        for j in 0..m {
            for l in (0..m).filter(|&l| l != j) {
                w[j][l] = lm.add_var(format!("w_{i}_{j}_{l}"), VarKind::Binary, 0.0, 1.0);
            }
        }
        for j in 0..m {
            for l in (0..m).filter(|&l| l != j) {
                lam[j][l] =
                    lm.add_var(format!("lam_{i}_{j}_{l}"), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
            }
        }
        let big = if options.single_big_m { constants.m_eta } else { constants.per_cut_m[i] };
        let mut terms = vec![(eta, 1.0)];
        terms.extend(x.iter().zip(&cut.secant.c).map(|(&v, &c)| (v, -c)));
        terms.extend(z.iter().map(|&v| (v, -big)));
        lm.add_row(format!("cut_{i}"), terms, Sense::Ge, cut.secant.b - big);
        lm.add_row(format!("sos_{i}"), z.iter().map(|&v| (v, 1.0)).collect(), Sense::Le, 1.0);
        let pt = |j: usize| family.points[cut.ids[j]].coords();
        for j in 0..m {
            for h in 0..n {
                let mut terms = vec![(x[h], 1.0)];
                for l in (0..m).filter(|&l| l != j) {
                    terms.push((lam[j][l], -((pt(j)[h] - pt(l)[h]) as f64)));
                }
                lm.add_row(format!("cone_{i}_{j}_{h}"), terms, Sense::Eq, pt(j)[h] as f64);
            }
        }
        for j in 0..m {
            for l in (0..m).filter(|&l| l != j) {
                lm.add_row(format!("lamlb_{i}_{j}_{l}"), vec![(lam[j][l], 1.0), (z[j], -ml)], Sense::Ge, -ml);
            }
        }
        for j in 0..m {
            for l in (0..m).filter(|&l| l != j) {
                lm.add_row(format!("lamub_{i}_{j}_{l}"), vec![(lam[j][l], 1.0), (w[j][l], -ml)], Sense::Le, -el);
            }
        }
        for j in 0..m {
            let ws = (0..m).filter(|&l| l != j).map(|l| (w[j][l], 1.0));
            let mut lo = vec![(z[j], n as f64)];
            lo.extend(ws.clone().map(|(v, _)| (v, -1.0)));
            lm.add_row(format!("zwlo_{i}_{j}"), lo, Sense::Le, 0.0);
            let mut hi: Vec<(usize, f64)> = ws.collect();
            hi.push((z[j], -1.0));
            lm.add_row(format!("zwhi_{i}_{j}"), hi, Sense::Le, (n - 1) as f64);
        }
    }

    let values_per_axis: Vec<usize> =
        dom.lower().iter().zip(dom.upper()).map(|(&l, &u)| (u - l + 1) as usize).collect();
    if options.no_good {
        let mut xi = Vec::with_capacity(n);
        for h in 0..n {
            let vars: Vec<usize> = (0..values_per_axis[h])
                .map(|t| lm.add_var(format!("xi_{h}_{t}"), VarKind::Binary, 0.0, 1.0))
                .collect();
            xi.push(vars);
        }
        for h in 0..n {
            let mut terms = vec![(x[h], 1.0)];
            terms.extend(xi[h].iter().enumerate().map(|(t, &v)| (v, -((dom.lower()[h] + t as i64) as f64))));
            lm.add_row(format!("xdef_{h}"), terms, Sense::Eq, 0.0);
            lm.add_row(format!("onehot_{h}"), xi[h].iter().map(|&v| (v, 1.0)).collect(), Sense::Eq, 1.0);
        }
        for (k, (p, &f)) in family.points.iter().zip(&family.fvals).enumerate() {
            let big = (f - constants.l_f).max(0.0);
            let mut terms = vec![(eta, 1.0)];
            for h in 0..n {
                let own = (p.coords()[h] - dom.lower()[h]) as usize;
                for (t, &v) in xi[h].iter().enumerate() {
                    terms.push((v, if t == own { -big } else { big }));
                }
            }
            lm.add_row(format!("ng_{k}"), terms, Sense::Ge, f - big * n as f64);
        }
    }

    CpfModel {
        n,
        cuts: family.cuts.len(),
        evaluated: family.points.len(),
        values_per_axis,
        options,
        constants: constants.clone(),
        linear: lm,
    }
}

/// Values for every variable of `model` describing the point `x` with
/// objective value `eta`: `z`, `w` and `lam` follow the cone containing `x`.
pub fn cone_consistent_assignment(model: &CpfModel, family: &CutFamily, x: &[i64], eta: f64) -> Assignment {
    let m = model.n + 1;
    let mut a = Assignment::new();
    a.insert("eta".into(), eta);
    for (h, &v) in x.iter().enumerate() {
        a.insert(format!("x_{h}"), v as f64);
    }
    for (i, cut) in family.cuts.iter().enumerate() {
        let beta: Vec<f64> = (0..m).map(|l| cut.barycentric(l, x)).collect();
        for j in 0..m {
            let inside = (0..m).all(|l| l == j || beta[l] <= 0.0);
            a.insert(format!("z_{i}_{j}"), inside as u8 as f64);
            for l in (0..m).filter(|&l| l != j) {
                let lam = -beta[l];
                a.insert(format!("lam_{i}_{j}_{l}"), lam);
                a.insert(format!("w_{i}_{j}_{l}"), (lam >= 0.0) as u8 as f64);
            }
        }
    }
    if model.options.no_good {
        for (h, &n_vals) in model.values_per_axis.iter().enumerate() {
            let lo = model.linear.variables[1 + h].lower as i64;
            for t in 0..n_vals {
                a.insert(format!("xi_{h}_{t}"), (x[h] - lo == t as i64) as u8 as f64);
            }
        }
    }
    a
}

pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Row name, or the variable name for bound and integrality violations.
    pub row: String,
    pub lhs: f64,
    pub rhs: f64,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViolationReport {
    pub objective: f64,
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, row: &str) -> bool {
        self.violations.iter().any(|v| v.row == row)
    }
}

const FEAS_TOL: f64 = 1e-9;

pub fn validate_assignment(model: &LinearModel, a: &Assignment) -> Result<ViolationReport, MilpError> {
    let missing: Vec<String> =
        model.variables.iter().filter(|v| !a.contains_key(&v.name)).map(|v| v.name.clone()).collect();
    if !missing.is_empty() {
        return Err(MilpError::IncompleteAssignment { missing });
    }
    let vals: Vec<f64> = model.variables.iter().map(|v| a[&v.name]).collect();
    let mut report = ViolationReport {
        objective: model.objective.iter().map(|&(v, c)| c * vals[v]).sum(),
        violations: Vec::new(),
    };
    for (v, &x) in model.variables.iter().zip(&vals) {
        let tol = FEAS_TOL * (1.0 + x.abs());
        let (lo, hi) = match v.kind {
            VarKind::Binary => (0.0, 1.0),
            _ => (v.lower, v.upper),
        };
        let out = (lo - x).max(x - hi).max(0.0);
        let frac = if v.kind == VarKind::Continuous { 0.0 } else { (x - x.round()).abs() };
        if out > tol || frac > tol {
            report.violations.push(Violation { row: v.name.clone(), lhs: x, rhs: if x < lo { lo } else { hi }, amount: out.max(frac) });
        }
    }
    for r in &model.rows {
        let lhs: f64 = r.terms.iter().map(|&(v, c)| c * vals[v]).sum();
        let scale = 1.0 + r.rhs.abs() + r.terms.iter().map(|&(v, c)| (c * vals[v]).abs()).sum::<f64>();
        let amount = match r.sense {
            Sense::Le => lhs - r.rhs,
            Sense::Ge => r.rhs - lhs,
            Sense::Eq => (lhs - r.rhs).abs(),
        };
        if amount > FEAS_TOL * scale {
            report.violations.push(Violation { row: r.name.clone(), lhs, rhs: r.rhs, amount });
        }
    }
    Ok(report)
}

/// Shortest decimal that survives rounding to 15 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r: f64 = format!("{v:.14e}").parse().unwrap();
    format!("{r}")
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], vars: &[Variable]) {
    for &(v, c) in terms {
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", fmt_num(c.abs()), vars[v].name);
    }
}

pub fn write_lp(model: &LinearModel) -> String {
    let mut s = String::from("Minimize\n obj:");
    write_terms(&mut s, &model.objective, &model.variables);
    s.push_str("\nSubject To\n");
    for r in &model.rows {
        let _ = write!(s, " {}:", r.name);
        if r.terms.is_empty() {
            s.push_str(" + 0 eta");
        }
        write_terms(&mut s, &r.terms, &model.variables);
        let _ = writeln!(s, " {} {}", r.sense.symbol(), fmt_num(r.rhs));
    }
    s.push_str("Bounds\n");
    for v in model.variables.iter().filter(|v| v.kind != VarKind::Binary) {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(s, " {} free", v.name);
        } else {
            let _ = writeln!(s, " {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper));
        }
    }
    for (title, kind) in [("Generals", VarKind::General), ("Binaries", VarKind::Binary)] {
        s.push_str(title);
        s.push('\n');
        for v in model.variables.iter().filter(|v| v.kind == kind) {
            let _ = writeln!(s, " {}", v.name);
        }
    }
    s.push_str("End\n");
    s
}

pub fn export_lp(model: &CpfModel, path: &Path) -> Result<(), MilpError> {
    std::fs::write(path, model.to_lp())?;
    Ok(())
}

/// Write the constants sidecar next to an LP file.
pub fn export_sidecar(model: &CpfModel, path: &Path) -> Result<(), MilpError> {
    let c = model.counts();
    let mut s = model.constants.sidecar();
    let _ = writeln!(s, "cuts = {}", model.cuts);
    let _ = writeln!(s, "evaluated = {}", model.evaluated);
    let _ = writeln!(s, "binaries = {}", c.binaries);
    let _ = writeln!(s, "continuous = {}", c.continuous);
    let _ = writeln!(s, "integers = {}", c.integers);
    let _ = writeln!(s, "rows = {}", c.rows);
    let _ = writeln!(s, "single_big_m = {}", model.options.single_big_m);
    let _ = writeln!(s, "no_good = {}", model.options.no_good);
    std::fs::write(path, s)?;
    Ok(())
}

/// Read an LP file in the dialect produced by [`write_lp`].
pub fn parse_lp(text: &str) -> Result<LinearModel, MilpError> {
    #[derive(PartialEq)]
    enum Section {
        Start,
        Objective,
        Rows,
        Bounds,
        Generals,
        Binaries,
        End,
    }
    let mut model = LinearModel::default();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut section = Section::Start;
    let mut declared: Vec<usize> = Vec::new();
    let mut var = |name: &str, model: &mut LinearModel| -> usize {
        *index.entry(name.to_string()).or_insert_with(|| {
            model.add_var(name.to_string(), VarKind::Continuous, 0.0, f64::INFINITY)
        })
    };
    let num = |tok: &str, line: usize| -> Result<f64, MilpError> {
        match tok {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => tok.parse().map_err(|_| MilpError::Parse { line, message: format!("bad number {tok:?}") }),
        }
    };
    let err = |line: usize, message: &str| MilpError::Parse { line, message: message.to_string() };
    let terms = |toks: &[&str], line: usize, model: &mut LinearModel, var: &mut dyn FnMut(&str, &mut LinearModel) -> usize| {
        if toks.len() % 3 != 0 {
            return Err(err(line, "terms must be `sign coefficient name`"));
        }
        let mut out = Vec::new();
        for t in toks.chunks_exact(3) {
            let sign = match t[0] {
                "+" => 1.0,
                "-" => -1.0,
                _ => return Err(err(line, "expected + or -")),
            };
            out.push((var(t[2], model), sign * num(t[1], line)?));
        }
        Ok(out)
    };
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('\\') {
            continue;
        }
        let next = match l {
            "Minimize" => Some(Section::Objective),
            "Subject To" => Some(Section::Rows),
            "Bounds" => Some(Section::Bounds),
            "Generals" => Some(Section::Generals),
            "Binaries" => Some(Section::Binaries),
            "End" => Some(Section::End),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        match section {
            Section::Objective => {
                if toks.first() != Some(&"obj:") {
                    return Err(err(line, "expected `obj:`"));
                }
                model.objective = terms(&toks[1..], line, &mut model, &mut var)?;
            }
            Section::Rows => {
                let name = toks[0].strip_suffix(':').ok_or_else(|| err(line, "row without name"))?;
                if toks.len() < 3 {
                    return Err(err(line, "row too short"));
                }
                let sense = match toks[toks.len() - 2] {
                    "<=" => Sense::Le,
                    ">=" => Sense::Ge,
                    "=" => Sense::Eq,
                    _ => return Err(err(line, "missing sense")),
                };
                let rhs = num(toks[toks.len() - 1], line)?;
                let t = terms(&toks[1..toks.len() - 2], line, &mut model, &mut var)?;
                let t = if t.len() == 1 && t[0].1 == 0.0 { Vec::new() } else { t };
                model.rows.push(Row { name: name.to_string(), terms: t, sense, rhs });
            }
            Section::Bounds => match toks.as_slice() {
                [name, "free"] => {
                    let v = var(name, &mut model);
                    declared.push(v);
                    model.variables[v].lower = f64::NEG_INFINITY;
                    model.variables[v].upper = f64::INFINITY;
                }
                [lo, "<=", name, "<=", hi] => {
                    let v = var(name, &mut model);
                    declared.push(v);
                    model.variables[v].lower = num(lo, line)?;
                    model.variables[v].upper = num(hi, line)?;
                }
                _ => return Err(err(line, "unsupported bound")),
            },
            Section::Generals | Section::Binaries => {
                for name in toks {
                    let v = var(name, &mut model);
                    let vr = &mut model.variables[v];
                    if section == Section::Binaries {
                        declared.push(v);
                        vr.kind = VarKind::Binary;
                        vr.lower = 0.0;
                        vr.upper = 1.0;
                    } else {
                        vr.kind = VarKind::General;
                    }
                }
            }
            Section::Start | Section::End => return Err(err(line, "text outside a section")),
        }
    }
    if section != Section::End {
        return Err(err(text.lines().count(), "missing End"));
    }
    // Declaration order, so that writing the parsed model reproduces the file.
    let mut order = Vec::with_capacity(model.variables.len());
    let mut seen = vec![false; model.variables.len()];
    for v in declared.into_iter().chain(0..model.variables.len()) {
        if !std::mem::replace(&mut seen[v], true) {
            order.push(v);
        }
    }
    let mut new_index = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let old_vars = std::mem::take(&mut model.variables);
    model.variables = order.iter().map(|&o| old_vars[o].clone()).collect();
    let remap = |t: &mut Vec<(usize, f64)>| t.iter_mut().for_each(|e| e.0 = new_index[e.0]);
    remap(&mut model.objective);
    model.rows.iter_mut().for_each(|r| remap(&mut r.terms));
    Ok(model)
}
