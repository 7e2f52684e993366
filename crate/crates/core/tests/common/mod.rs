#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sucil::geometry::POISED_TOL;
use sucil::underestimator::{init_table, update_eta, Cut, DEFAULT_MEMORY_BUDGET};
use sucil::{check_poised, facet_halfspaces, fit_secant, ActiveSet, Domain, EtaTable, LatticePoint};

pub fn pts(raw: &[&[i64]]) -> Vec<LatticePoint> {
    raw.iter().map(|p| LatticePoint::new(p.to_vec())).collect()
}

/// Random affinely independent set of `n+1` points with coordinates in `[-r, r]`.
pub fn random_poised(rng: &mut ChaCha8Rng, n: usize, r: i64) -> Vec<LatticePoint> {
    loop {
        let p: Vec<LatticePoint> =
            (0..=n).map(|_| LatticePoint::new((0..n).map(|_| rng.gen_range(-r..=r)).collect())).collect();
        if check_poised(&p, POISED_TOL).is_ok() {
            return p;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Multipliers of `x = x^j + sum_{l != j} lam_l (x^j - x^l)`, by a dense solve.
pub fn lambda_rep(points: &[LatticePoint], j: usize, x: &[i64]) -> Vec<f64> {
    let n = x.len();
    let others: Vec<usize> = (0..points.len()).filter(|&l| l != j).collect();
    let xj = points[j].coords();
    let a = DMatrix::from_fn(n, n, |r, c| (xj[r] - points[others[c]].coords()[r]) as f64);
    let rhs = DVector::from_fn(n, |r, _| (x[r] - xj[r]) as f64);
    let sol = a.lu().solve(&rhs).expect("poised set gives an invertible system");
    sol.iter().copied().collect()
}

pub fn make_cut(points: &[LatticePoint], fvals: &[f64], ids: Vec<u32>) -> Cut {
    let ps = check_poised(points, POISED_TOL).unwrap();
    Cut { ids, secant: fit_secant(&ps, fvals).unwrap(), cones: facet_halfspaces(&ps) }
}

/// Every poised `(n+1)`-subset of `points`, as cuts with ids into `points`.
pub fn all_cuts(points: &[LatticePoint], f: impl Fn(&[i64]) -> f64) -> Vec<Cut> {
    let n = points[0].dim();
    let fv: Vec<f64> = points.iter().map(|p| f(p.coords())).collect();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..=n).collect();
    if points.len() < n + 1 {
        return out;
    }
    loop {
        let sub: Vec<LatticePoint> = idx.iter().map(|&i| points[i].clone()).collect();
        if let Ok(ps) = check_poised(&sub, POISED_TOL) {
            let vals: Vec<f64> = idx.iter().map(|&i| fv[i]).collect();
            out.push(Cut {
                ids: idx.iter().map(|&i| i as u32).collect(),
                secant: fit_secant(&ps, &vals).unwrap(),
                cones: facet_halfspaces(&ps),
            });
        }
        let mut k = n + 1;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if idx[k] < points.len() - (n + 1 - k) {
                break;
            }
            if k == 0 {
                return out;
            }
        }
        idx[k] += 1;
        for t in k + 1..=n {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

pub fn table_from(dom: &Domain, cuts: &[Cut]) -> EtaTable {
    let mut t = init_table(dom, DEFAULT_MEMORY_BUDGET).unwrap();
    let all = ActiveSet::all(dom);
    for c in cuts {
        update_eta(&mut t, dom, &c.ids, &c.secant, &c.cones, &all);
    }
    t
}

/// Random convex function on the lattice: a sum of squared integer affine
/// forms plus a max of affine pieces.
pub fn random_convex(rng: &mut ChaCha8Rng, n: usize) -> impl Fn(&[i64]) -> f64 + Clone {
    let squares: Vec<(Vec<i64>, i64)> =
        (0..rng.gen_range(1..=3)).map(|_| ((0..n).map(|_| rng.gen_range(-2..=2)).collect(), rng.gen_range(-3..=3))).collect();
    let pieces: Vec<(Vec<f64>, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| ((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(), rng.gen_range(-2.0..2.0)))
        .collect();
    move |x: &[i64]| {
        let q: f64 = squares
            .iter()
            .map(|(a, b)| {
                let v = a.iter().zip(x).map(|(a, x)| a * x).sum::<i64>() + b;
                (v * v) as f64
            })
            .sum();
        let m = pieces
            .iter()
            .map(|(c, b)| c.iter().zip(x).map(|(c, &x)| c * x as f64).sum::<f64>() + b)
            .fold(f64::NEG_INFINITY, f64::max);
        q + m
    }
}
