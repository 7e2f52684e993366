//! Spatial index over the active points for the update phase.
//!
//! A cut only matters at active points inside its cone union where it beats
//! the current bound. Both conditions are linear over a box, so a kd-tree
//! with per-node bounding boxes and minimum bounds lets whole regions be
//! skipped: a node is dropped when the secant's maximum over its box does
//! not exceed the node's smallest bound, or when two facets are positive on
//! the whole box (every point then has two positive barycentric
//! coordinates and lies outside the union).
//!
//! Leaves are scanned facet by facet over coordinate columns so the inner
//! loops vectorize.

use crate::lattice::Domain;
use crate::underestimator::EtaTable;

const LEAF: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Node {
    start: u32,
    end: u32,
    /// Children, or `u32::MAX` for a leaf.
    left: u32,
    right: u32,
    min_eta: f64,
}

#[derive(Debug)]
pub(crate) struct ActiveTree {
    n: usize,
    /// Domain indices of the active points in tree order.
    pub idx: Vec<u32>,
    /// Coordinate columns: `cols[h * len + p]`.
    cols: Vec<f64>,
    /// Bounds at the time the tree was built.
    eta: Vec<f64>,
    nodes: Vec<Node>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// What one cut does to the tree's points.
#[derive(Debug, Default, Clone)]
pub(crate) struct CutScan {
    pub updating: bool,
    pub pruning: bool,
    /// (tree position, secant value) where the secant beats the current table.
    pub hits: Vec<(u32, f64)>,
}

/// Per-thread buffers for [`ActiveTree::scan`].
#[derive(Debug, Default)]
pub(crate) struct ScanBuffers {
    stack: Vec<u32>,
    value: Vec<f64>,
    facet: Vec<f64>,
    positive: Vec<u8>,
}

impl ActiveTree {
    pub fn build(dom: &Domain, active: &[u32], table: &EtaTable) -> Self {
        let n = dom.dim();
        let mut perm: Vec<u32> = active.to_vec();
        let mut t = Self {
            n,
            idx: Vec::new(),
            cols: Vec::new(),
            eta: Vec::new(),
            nodes: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
        };
        if !perm.is_empty() {
            t.split(dom, table, &mut perm, 0);
        }
        let len = perm.len();
        t.cols = vec![0.0; n * len];
        for (p, &i) in perm.iter().enumerate() {
            for (h, &v) in dom.point_f64(i as usize).iter().enumerate() {
                t.cols[h * len + p] = v;
            }
        }
        t.eta = perm.iter().map(|&i| table.eta(i as usize)).collect();
        t.idx = perm;
        t
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.idx.len()
    }

    fn split(&mut self, dom: &Domain, table: &EtaTable, pts: &mut [u32], offset: usize) -> u32 {
        let n = self.n;
        let id = self.nodes.len() as u32;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        let mut min_eta = f64::INFINITY;
        for &i in pts.iter() {
            for (h, &v) in dom.point_f64(i as usize).iter().enumerate() {
                lo[h] = lo[h].min(v);
                hi[h] = hi[h].max(v);
            }
            min_eta = min_eta.min(table.eta(i as usize));
        }
        let start = offset as u32;
        let end = (offset + pts.len()) as u32;
        self.nodes.push(Node { start, end, left: u32::MAX, right: u32::MAX, min_eta });
        let axis = (0..n).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap();
        let wide = hi[axis] > lo[axis];
        self.lo.extend_from_slice(&lo);
        self.hi.extend_from_slice(&hi);
        if pts.len() > LEAF && wide {
            let mid = pts.len() / 2;
            pts.select_nth_unstable_by(mid, |&a, &b| {
                let (pa, pb) = (dom.point_slice(a as usize)[axis], dom.point_slice(b as usize)[axis]);
                pa.cmp(&pb).then(a.cmp(&b))
            });
            let (l, r) = pts.split_at_mut(mid);
            let left = self.split(dom, table, l, offset);
            let right = self.split(dom, table, r, offset + mid);
            self.nodes[id as usize].left = left;
            self.nodes[id as usize].right = right;
        }
        id
    }

    /// Could the secant `(c, b)` beat the bound anywhere in the root box?
    pub fn root_may_update(&self, secant: &[f64]) -> bool {
        !self.nodes.is_empty() && self.node_max(0, secant) > self.nodes[0].min_eta
    }

    fn node_max(&self, node: usize, secant: &[f64]) -> f64 {
        let n = self.n;
        let (lo, hi) = (&self.lo[node * n..][..n], &self.hi[node * n..][..n]);
        let mut v = secant[n];
        for h in 0..n {
            let c = secant[h];
            v += if c > 0.0 { c * hi[h] } else { c * lo[h] };
        }
        v
    }

    fn outside_union(&self, node: usize, facets: &[f64], tol: f64) -> bool {
        let n = self.n;
        let m = n + 1;
        let (lo, hi) = (&self.lo[node * n..][..n], &self.hi[node * n..][..n]);
        let mut positive = 0;
        for row in facets.chunks_exact(m) {
            let mut v = row[n];
            for h in 0..n {
                let c = row[h];
                v += if c > 0.0 { c * lo[h] } else { c * hi[h] };
            }
            if v > tol {
                positive += 1;
                if positive == 2 {
                    return true;
                }
            }
        }
        false
    }

    /// `row . (x, 1)` for the points starting at tree position `start`, summed
    /// in the same order as `locate_fast`.
    #[inline]
    fn affine(&self, row: &[f64], start: usize, out: &mut [f64]) {
        let n = self.n;
        let len = self.idx.len();
        out.fill(0.0);
        for h in 0..n {
            let c = row[h];
            let col = &self.cols[h * len + start..][..out.len()];
            for (o, &x) in out.iter_mut().zip(col) {
                *o += c * x;
            }
        }
        let b = row[n];
        out.iter_mut().for_each(|o| *o += b);
    }

    /// Apply the pruning tests and scan the surviving leaves.
    #[allow(clippy::too_many_arguments)]
    pub fn scan(
        &self,
        secant: &[f64],
        facets: &[f64],
        tol: f64,
        cur_eta: &[f64],
        prune_at: f64,
        buf: &mut ScanBuffers,
        out: &mut CutScan,
    ) {
        let m = self.n + 1;
        buf.stack.clear();
        buf.stack.push(0);
        while let Some(node) = buf.stack.pop() {
            let nd = self.nodes[node as usize];
            if self.node_max(node as usize, secant) <= nd.min_eta || self.outside_union(node as usize, facets, tol) {
                continue;
            }
            if nd.left != u32::MAX {
                buf.stack.push(nd.right);
                buf.stack.push(nd.left);
                continue;
            }
            let (start, end) = (nd.start as usize, nd.end as usize);
            let k = end - start;
            buf.value.resize(k, 0.0);
            self.affine(secant, start, &mut buf.value);
            let eta = &self.eta[start..end];
            if !buf.value.iter().zip(eta).any(|(v, e)| v > e) {
                continue;
            }
            buf.positive.clear();
            buf.positive.resize(k, 0);
            buf.facet.resize(k, 0.0);
            for row in facets.chunks_exact(m) {
                self.affine(row, start, &mut buf.facet);
                for (c, &f) in buf.positive.iter_mut().zip(&buf.facet) {
                    *c += (f > tol) as u8;
                }
            }
            for q in 0..k {
                let v = buf.value[q];
                if buf.positive[q] != 1 || v <= eta[q] {
                    continue;
                }
                let p = start + q;
                out.updating = true;
                out.pruning |= v >= prune_at;
                if v > cur_eta[self.idx[p] as usize] {
                    out.hits.push((p as u32, v));
                }
            }
        }
    }
}
