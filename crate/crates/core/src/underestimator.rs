//! Enumerative piecewise-linear lower bound over the whole feasible set.
//!
//! The table keeps one value `eta(x)` per point of the domain, starting at
//! `-inf`. Each conditional cut raises `eta` to the secant value at the points
//! of its cone union; cuts are never stored, only their effect. Alongside each
//! finite entry the table remembers which `n+1` evaluated points produced it,
//! which is what the generator set is assembled from.
//!
//! # Concurrency
//!
//! Cuts can be scanned concurrently against a frozen snapshot of the table:
//! each scan only reports the points where its secant beats the snapshot.
//! The hits are then merged in cut order with strict improvement, which is
//! exactly what applying the cuts one at a time would do, so [`apply_cuts`]
//! produces bit-identical tables in serial and parallel mode.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{locate_fast, ConeComplex, Secant};
use crate::lattice::Domain;

/// Default cap on table memory: 2 GiB.
pub const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

const NO_GEN: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("table for {points} points needs {bytes} bytes, budget is {budget}")]
    CapacityExceeded { points: usize, bytes: usize, budget: usize },
    #[error("active set is empty")]
    EmptyActiveSet,
}

/// Per-point lower bounds with generator bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTable {
    width: usize,
    eta: Vec<f64>,
    gen: Vec<u32>,
}

impl EtaTable {
    /// Bytes a table over `dom` would occupy.
    pub fn bytes_for(dom: &Domain) -> usize {
        dom.len().saturating_mul(8 + 4 * (dom.dim() + 1))
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn eta(&self, idx: usize) -> f64 {
        self.eta[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.eta
    }

    /// Ids of the evaluated points whose secant attains `eta(idx)`.
    pub fn generators(&self, idx: usize) -> Option<&[u32]> {
        let g = &self.gen[idx * self.width..(idx + 1) * self.width];
        (g[0] != NO_GEN).then_some(g)
    }

    pub(crate) fn raise_at(&mut self, idx: usize, value: f64, ids: &[u32]) -> bool {
        if value > self.eta[idx] {
            self.eta[idx] = value;
            self.gen[idx * self.width..(idx + 1) * self.width].copy_from_slice(ids);
            true
        } else {
            false
        }
    }

    /// Dump as CSV: one row per point with coordinates, `eta` and the
    /// generator ids separated by `;`.
    pub fn write_csv<W: Write>(&self, dom: &Domain, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=dom.dim()).map(|i| format!("x{i}")).collect();
        header.push("eta".into());
        header.push("gen".into());
        out.write_record(&header)?;
        for (i, x) in dom.iter().enumerate() {
            let mut row: Vec<String> = x.iter().map(i64::to_string).collect();
            row.push(format_eta(self.eta[i]));
            row.push(
                self.generators(i)
                    .map(|g| g.iter().map(u32::to_string).collect::<Vec<_>>().join(";"))
                    .unwrap_or_default(),
            );
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn format_eta(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Unevaluated points whose bound is still below the incumbent, in
/// enumeration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveSet {
    idx: Vec<u32>,
}

impl ActiveSet {
    pub fn all(dom: &Domain) -> Self {
        Self { idx: (0..dom.len() as u32).collect() }
    }

    /// Build from arbitrary indices; they are sorted and deduplicated.
    pub fn from_indices(mut idx: Vec<u32>) -> Self {
        idx.sort_unstable();
        idx.dedup();
        Self { idx }
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.idx
    }

    pub fn contains(&self, i: usize) -> bool {
        self.idx.binary_search(&(i as u32)).is_ok()
    }
}

pub fn init_table(dom: &Domain, budget: usize) -> Result<EtaTable, TableError> {
    let bytes = EtaTable::bytes_for(dom);
    if bytes > budget {
        return Err(TableError::CapacityExceeded { points: dom.len(), bytes, budget });
    }
    let width = dom.dim() + 1;
    Ok(EtaTable { width, eta: vec![f64::NEG_INFINITY; dom.len()], gen: vec![NO_GEN; dom.len() * width] })
}

/// A fitted conditional cut ready to be applied.
#[derive(Debug, Clone)]
pub struct Cut {
    /// Evaluated-point ids of the interpolation set, in cone order.
    pub ids: Vec<u32>,
    pub secant: Secant,
    pub cones: ConeComplex,
}

impl Cut {
    fn secant_row(&self) -> Vec<f64> {
        self.secant.c.iter().copied().chain([self.secant.b]).collect()
    }

    fn facet_rows(&self) -> Vec<f64> {
        self.cones.halfspaces().iter().flat_map(|h| h.normal.iter().copied().chain([h.offset])).collect()
    }
}

/// What one cut would do to a snapshot of the table.
#[derive(Debug, Clone, Default)]
pub(crate) struct ScanOutcome {
    /// `(omega index, secant value)` for every restricted point inside the
    /// cone union where the secant beats the snapshot.
    pub hits: Vec<(u32, f64)>,
    /// Some hit reaches `prune_at`.
    pub pruning: bool,
}

/// Scan one cut against `eta`. `secant` is `(c, b)`; `facets` holds the
/// normalized facet rows.
#[inline]
pub(crate) fn scan_cut(
    dom: &Domain,
    restrict: &[u32],
    eta: &[f64],
    secant: &[f64],
    facets: &[f64],
    tol: f64,
    prune_at: f64,
) -> ScanOutcome {
    let m = secant.len();
    let (c, b) = secant.split_at(m - 1);
    let b = b[0];
    let mut out = ScanOutcome::default();
    for &i in restrict {
        let x = dom.point_f64(i as usize);
        let v = c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + b;
        if v > eta[i as usize] && locate_fast(facets, m, x, tol).is_some() {
            out.pruning |= v >= prune_at;
            out.hits.push((i, v));
        }
    }
    out
}

/// Raise the table at `hits`; returns the number of strict improvements.
pub(crate) fn apply_hits(table: &mut EtaTable, ids: &[u32], hits: &[(u32, f64)]) -> usize {
    hits.iter().filter(|&&(i, v)| table.raise_at(i as usize, v, ids)).count()
}

/// Apply one cut to the points of `restrict` inside its cone union.
pub fn update_eta(
    table: &mut EtaTable,
    dom: &Domain,
    ids: &[u32],
    secant: &Secant,
    cones: &ConeComplex,
    restrict: &ActiveSet,
) -> usize {
    let cut = Cut { ids: ids.to_vec(), secant: secant.clone(), cones: cones.clone() };
    let scan = scan_cut(
        dom,
        restrict.indices(),
        &table.eta,
        &cut.secant_row(),
        &cut.facet_rows(),
        cones.tolerance(),
        f64::INFINITY,
    );
    apply_hits(table, ids, &scan.hits)
}

/// Apply a batch of cuts, optionally scanning them in parallel. The result
/// equals applying them one after another with [`update_eta`].
pub fn apply_cuts(table: &mut EtaTable, dom: &Domain, cuts: &[Cut], restrict: &ActiveSet, parallel: bool) -> usize {
    let snapshot = &table.eta;
    let scan = |cut: &Cut| {
        scan_cut(
            dom,
            restrict.indices(),
            snapshot,
            &cut.secant_row(),
            &cut.facet_rows(),
            cut.cones.tolerance(),
            f64::INFINITY,
        )
        .hits
    };
    let all: Vec<Vec<(u32, f64)>> =
        if parallel { cuts.par_iter().map(scan).collect() } else { cuts.iter().map(scan).collect() };
    let mut updated = 0;
    for (cut, hits) in cuts.iter().zip(&all) {
        updated += apply_hits(table, &cut.ids, hits);
    }
    updated
}

/// Minimum of `eta` over `restrict` and the first point attaining it.
pub fn table_min(table: &EtaTable, restrict: &ActiveSet) -> Result<(f64, usize), TableError> {
    let mut best: Option<(f64, usize)> = None;
    for &i in restrict.indices() {
        let v = table.eta[i as usize];
        if best.map_or(true, |(b, _)| v < b) {
            best = Some((v, i as usize));
        }
    }
    best.ok_or(TableError::EmptyActiveSet)
}

/// Union of the generator ids over `restrict`.
pub fn generator_set(table: &EtaTable, restrict: &ActiveSet) -> BTreeSet<u32> {
    restrict
        .indices()
        .iter()
        .filter_map(|&i| table.generators(i as usize))
        .flat_map(|g| g.iter().copied())
        .collect()
}

/// `{x not evaluated : eta(x) < u}`.
pub fn refresh_active(table: &EtaTable, evaluated: &[bool], u: f64) -> ActiveSet {
    let idx = (0..table.len())
        .filter(|&i| !evaluated[i] && table.eta[i] < u)
        .map(|i| i as u32)
        .collect();
    ActiveSet { idx }
}
