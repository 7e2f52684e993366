use approx::assert_relative_eq;
use proptest::prelude::*;
use sucil::geometry::{check_poised, POISED_TOL};
use sucil::milp_export::*;
use sucil::problems::{Objective, ProblemSpec};
use sucil::solver::initial_stencil;
use sucil::{Domain, LatticePoint, Secant};

fn lp(v: &[i64]) -> LatticePoint {
    LatticePoint::new(v.to_vec())
}

fn evaluated(points: &[&[i64]], f: impl Fn(&[i64]) -> f64) -> Vec<(LatticePoint, f64)> {
    points.iter().map(|p| (lp(p), f(p))).collect()
}

/// Smallest feasible objective of a model whose only free continuous
/// variables are `eta` and the cone multipliers, by enumerating `x` and all
/// binaries.
fn brute_force_minimum(model: &CpfModel, family: &CutFamily, dom: &Domain) -> Option<(f64, Vec<i64>)> {
    let lm = &model.linear;
    let binaries: Vec<usize> =
        (0..lm.variables.len()).filter(|&v| lm.variables[v].kind == VarKind::Binary).collect();
    assert!(binaries.len() <= 16);
    let eta = lm.var_index("eta").unwrap();
    let mut best: Option<(f64, Vec<i64>)> = None;
    for x in dom.iter() {
        let base = cone_consistent_assignment(model, family, x, 0.0);
        for mask in 0u32..(1 << binaries.len()) {
            let mut a = base.clone();
            for (k, &v) in binaries.iter().enumerate() {
                a.insert(lm.variables[v].name.clone(), ((mask >> k) & 1) as f64);
            }
            // eta at the largest lower bound any row puts on it
            let mut eta_min = f64::NEG_INFINITY;
            for r in &lm.rows {
                if let Some(&(_, ce)) = r.terms.iter().find(|t| t.0 == eta) {
                    let rest: f64 =
                        r.terms.iter().filter(|t| t.0 != eta).map(|&(v, c)| c * a[&lm.variables[v].name]).sum();
                    assert!(ce > 0.0 && r.sense == Sense::Ge);
                    eta_min = eta_min.max((r.rhs - rest) / ce);
                }
            }
            a.insert("eta".into(), eta_min);
            if validate_assignment(lm, &a).unwrap().feasible() && best.as_ref().map_or(true, |b| eta_min < b.0) {
                best = Some((eta_min, x.to_vec()));
            }
        }
    }
    best
}

#[test]
fn m_eta_closed_form() {
    let dom = Domain::cube(3, -2, 2).unwrap();
    let s = Secant { c: vec![1.0, -1.0, 2.0], b: 0.0 };
    let (per, max) = derive_m_eta(&[s], &dom, 0.0);
    assert_eq!(per, vec![8.0]);
    assert_eq!(max, 8.0);
    let flat = Secant { c: vec![0.0; 3], b: 5.0 };
    assert_eq!(derive_m_eta(&[flat], &dom, 5.0).0, vec![0.0]);
    let a = Secant { c: vec![0.0; 3], b: 3.0 };
    let b = Secant { c: vec![0.0; 3], b: 8.0 };
    assert_eq!(derive_m_eta(&[a, b], &dom, 0.0).1, 8.0);
}

#[test]
fn eps_lambda_from_integer_normals() {
    let h = |c: &[i64], b| IntegerHyperplane { c: c.to_vec(), b };
    assert_relative_eq!(derive_eps_lambda(&[h(&[3, 4], 0)]).unwrap(), 0.2);
    assert_relative_eq!(derive_eps_lambda(&[h(&[1, 0], 0)]).unwrap(), 1.0);
    assert_relative_eq!(derive_eps_lambda(&[h(&[3, 4], 0), h(&[1, 0], 7)]).unwrap(), 0.2);
    assert!(matches!(derive_eps_lambda(&[h(&[0, 0], 1)]), Err(MilpError::ZeroNormal)));
}

#[test]
fn m_lambda_box_vertices() {
    let dom = Domain::cube(2, -4, 4).unwrap();
    let h = |c: &[i64], b| IntegerHyperplane { c: c.to_vec(), b };
    assert_relative_eq!(derive_m_lambda(&[h(&[1, 0], 0)], &dom), 4.0);
    assert_relative_eq!(derive_m_lambda(&[h(&[1, 1], 0)], &dom), 8.0 / 2f64.sqrt());
    let point = Domain::new(vec![1, 2], vec![1, 2]).unwrap();
    assert_relative_eq!(derive_m_lambda(&[h(&[3, 4], -1)], &point), 10.0 / 5.0);
}

#[test]
fn rationalize_recovers_fractions() {
    for (p, q) in [(1, 3), (-7, 12), (22, 7), (0, 1), (5, 1), (-1, 1000)] {
        assert_eq!(rationalize(p as f64 / q as f64, 1e-12), Some((p, q)));
    }
}

#[test]
fn integer_facets_vanish_on_other_points() {
    let pts = [lp(&[0, 0, 0]), lp(&[2, 1, 0]), lp(&[0, 3, 1]), lp(&[1, 1, 4])];
    for l in 0..4 {
        let h = integer_facet(&pts, l).unwrap();
        let g = h.c.iter().chain([&h.b]).fold(0i64, |g, &v| num_gcd(g, v));
        assert_eq!(g, 1);
        for (k, p) in pts.iter().enumerate() {
            let v = h.value(p.coords());
            if k == l {
                assert!(v > 0);
            } else {
                assert_eq!(v, 0);
            }
        }
    }
}

fn num_gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        num_gcd(b, a % b)
    }
}

fn square_1d() -> (Domain, CutFamily) {
    let dom = Domain::cube(1, -4, 4).unwrap();
    let fam = CutFamily::enumerate(&evaluated(&[&[-1], &[1]], |x| (x[0] * x[0]) as f64)).unwrap();
    (dom, fam)
}

#[test]
fn one_cut_one_dimension_counts() {
    let (dom, fam) = square_1d();
    assert_eq!(fam.len(), 1);
    let k = ConstantBundle::derive(&fam, &dom, Some(0.0)).unwrap();
    let model = build_cpf(&fam, &dom, &k, CpfOptions::default());
    let c = model.counts();
    assert_eq!(c.binaries, 4);
    assert_eq!(c.continuous, 1 + 2);
    assert_eq!(c.integers, 1);
    assert_eq!(c.rows, 2 + 3 * 2 + 2 * 2);
    assert_eq!(c, model.expected_counts());
}

#[test]
fn square_example_correct_epsilon_is_half() {
    let (dom, fam) = square_1d();
    let k = ConstantBundle::derive(&fam, &dom, Some(0.0)).unwrap();
    assert_relative_eq!(k.eps_lambda, 0.5);
    assert!(k.m_lambda >= k.eps_lambda);
    let model = build_cpf(&fam, &dom, &k, CpfOptions::default());
    let a = cone_consistent_assignment(&model, &fam, &[0], 0.0);
    for j in 0..2 {
        assert_eq!(a[&format!("z_0_{j}")], 0.0);
    }
    assert!(validate_assignment(&model.linear, &a).unwrap().feasible());
    let (value, x) = brute_force_minimum(&model, &fam, &dom).unwrap();
    assert_eq!(x, vec![0]);
    assert_relative_eq!(value, 0.0);
}

#[test]
fn square_example_large_epsilon_terminates_falsely() {
    let (dom, fam) = square_1d();
    let k = ConstantBundle::derive(&fam, &dom, Some(0.0)).unwrap().with_eps_lambda(0.6);
    let model = build_cpf(&fam, &dom, &k, CpfOptions::default());
    let a = cone_consistent_assignment(&model, &fam, &[0], 0.0);
    let report = validate_assignment(&model.linear, &a).unwrap();
    assert!(!report.feasible());
    assert!(report.violates("lamub_0_0_1"));
    // switching both cones on satisfies the multiplier rows but not the cone count
    let mut b = a.clone();
    for j in 0..2 {
        b.insert(format!("z_0_{j}"), 1.0);
        b.insert(format!("w_0_{j}_{}", 1 - j), 1.0);
    }
    let report = validate_assignment(&model.linear, &b).unwrap();
    assert!(report.violates("sos_0"));
    // the model optimum is the cut value: lower bound equals the incumbent
    let (value, _) = brute_force_minimum(&model, &fam, &dom).unwrap();
    assert_relative_eq!(value, 1.0, epsilon = 1e-12);
}

#[test]
fn two_cones_reported() {
    let (dom, fam) = square_1d();
    let k = ConstantBundle::derive(&fam, &dom, Some(0.0)).unwrap();
    let model = build_cpf(&fam, &dom, &k, CpfOptions::default());
    let mut a = cone_consistent_assignment(&model, &fam, &[3], 10.0);
    assert!(validate_assignment(&model.linear, &a).unwrap().feasible());
    a.insert("z_0_0".into(), 1.0);
    a.insert("z_0_1".into(), 1.0);
    assert!(validate_assignment(&model.linear, &a).unwrap().violates("sos_0"));
    a.remove("lam_0_1_0");
    match validate_assignment(&model.linear, &a) {
        Err(MilpError::IncompleteAssignment { missing }) => assert_eq!(missing, vec!["lam_0_1_0".to_string()]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn too_few_points_has_no_cut() {
    let e = CutFamily::enumerate(&evaluated(&[&[0, 0], &[1, 0]], |_| 0.0));
    assert!(matches!(e, Err(MilpError::NoPoisedSubset { points: 2 })));
    let e = CutFamily::enumerate(&evaluated(&[&[0, 0], &[1, 1], &[2, 2]], |_| 0.0));
    assert!(matches!(e, Err(MilpError::NoPoisedSubset { .. })));
}

#[test]
fn abhi_first_model_has_twenty_cuts() {
    let dom = Domain::cube(3, -2, 2).unwrap();
    let p = ProblemSpec::new("abhi", 3).unwrap();
    let pts = initial_stencil(&LatticePoint::origin(3), &dom).unwrap();
    let ev: Vec<(LatticePoint, f64)> = pts.iter().map(|x| (x.clone(), p.eval(x.coords()))).collect();
    let fam = CutFamily::enumerate(&ev).unwrap();
    assert_eq!(fam.len(), 20);
    let k = ConstantBundle::derive(&fam, &dom, None).unwrap();
    for no_good in [false, true] {
        let model = build_cpf(&fam, &dom, &k, CpfOptions { no_good, single_big_m: false });
        assert_eq!(model.counts(), model.expected_counts());
    }
    let model = build_cpf(&fam, &dom, &k, CpfOptions { no_good: true, single_big_m: false });
    // 20 cuts of 16 binaries plus a one-hot expansion of 3 coordinates over 5 values
    assert_eq!(model.counts().binaries, 335);
}

#[test]
fn lp_round_trip_is_byte_identical() {
    let dom = Domain::cube(2, -2, 3).unwrap();
    let ev = evaluated(&[&[0, 0], &[1, 0], &[0, 1], &[-1, 2], &[2, -1]], |x| {
        (x[0] * x[0] + x[0] * x[1] + 2 * x[1] * x[1]) as f64 / 3.0 + 0.1
    });
    let fam = CutFamily::enumerate(&ev).unwrap();
    for options in [
        CpfOptions::default(),
        CpfOptions { no_good: true, single_big_m: true },
        CpfOptions { no_good: true, single_big_m: false },
    ] {
        let k = ConstantBundle::derive(&fam, &dom, None).unwrap();
        let model = build_cpf(&fam, &dom, &k, options);
        let text = model.to_lp();
        assert_eq!(text, build_cpf(&fam, &dom, &k, options).to_lp());
        let parsed = parse_lp(&text).unwrap();
        assert_eq!(write_lp(&parsed), text);
        assert_eq!(ModelCounts::of(&parsed), model.counts());
        // the parsed model accepts and rejects the same assignments
        let x = [1, 1];
        let a = cone_consistent_assignment(&model, &fam, &x, 50.0);
        assert!(validate_assignment(&model.linear, &a).unwrap().feasible());
        assert!(validate_assignment(&parsed, &a).unwrap().feasible());
    }
}

#[test]
fn lp_files_on_disk() {
    let (dom, fam) = square_1d();
    let k = ConstantBundle::derive(&fam, &dom, Some(0.0)).unwrap();
    let model = build_cpf(&fam, &dom, &k, CpfOptions::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.lp");
    export_lp(&model, &path).unwrap();
    export_sidecar(&model, &dir.path().join("m.constants.txt")).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("Minimize\n obj: + 1 eta\nSubject To\n"));
    assert!(text.ends_with("End\n"));
    assert!(text.contains("\nGenerals\n x_0\nBinaries\n z_0_0\n"));
    let side = std::fs::read_to_string(dir.path().join("m.constants.txt")).unwrap();
    assert!(side.contains("eps_lambda = 0.5\n"));
    assert!(side.contains("rows = 12\n"));
    let missing = dir.path().join("no/such/dir/m.lp");
    assert!(matches!(export_lp(&model, &missing), Err(MilpError::Io(_))));
}

#[test]
fn lp_parse_errors_carry_line_numbers() {
    let bad = "Minimize\n obj: + 1 eta\nSubject To\n r: + 1 eta >=\nEnd\n";
    match parse_lp(bad) {
        Err(MilpError::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_lp("Minimize\n obj: + 1 eta\n"), Err(MilpError::Parse { .. })));
}

#[test]
fn number_format_keeps_fifteen_digits() {
    assert_eq!(fmt_num(0.5), "0.5");
    assert_eq!(fmt_num(-0.0), "0");
    assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333333");
    assert_eq!(fmt_num(2.0), "2");
    let v: f64 = fmt_num(std::f64::consts::PI).parse().unwrap();
    assert_eq!(fmt_num(v), fmt_num(std::f64::consts::PI));
}

#[test]
fn no_good_rows_pin_eta_at_evaluated_points() {
    let dom = Domain::cube(2, -1, 2).unwrap();
    let f = |x: &[i64]| (x[0] * x[0] + x[1] * x[1]) as f64;
    let ev = evaluated(&[&[0, 0], &[1, 0], &[0, 1], &[2, 2]], f);
    let fam = CutFamily::enumerate(&ev).unwrap();
    let k = ConstantBundle::derive(&fam, &dom, Some(0.0)).unwrap();
    let model = build_cpf(&fam, &dom, &k, CpfOptions { no_good: true, single_big_m: false });
    for (i, (p, fv)) in ev.iter().enumerate() {
        let low = cone_consistent_assignment(&model, &fam, p.coords(), fv - 0.5);
        assert!(validate_assignment(&model.linear, &low).unwrap().violates(&format!("ng_{i}")));
        let ok = cone_consistent_assignment(&model, &fam, p.coords(), *fv);
        assert!(validate_assignment(&model.linear, &ok).unwrap().feasible(), "point {p:?}");
    }
    // away from evaluated points the no-good rows do not bind above l_f
    let a = cone_consistent_assignment(&model, &fam, &[-1, -1], 100.0);
    for i in 0..ev.len() {
        assert!(!validate_assignment(&model.linear, &a).unwrap().violates(&format!("ng_{i}")));
    }
}

fn point_set(n: usize, lo: i64, hi: i64, count: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::btree_set(prop::collection::vec(lo..=hi, n), count).prop_map(|s| s.into_iter().collect())
}

/// Largest cut value active at `x`, or `l_f` when none is.
fn plp_value(fam: &CutFamily, x: &[i64], l_f: f64) -> f64 {
    let m = fam.n + 1;
    let mut v = l_f;
    for cut in &fam.cuts {
        let beta: Vec<f64> = (0..m).map(|l| cut.barycentric(l, x)).collect();
        if beta.iter().filter(|&&b| b > 0.0).count() == 1 {
            v = v.max(cut.secant.value(x));
        }
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counts_match_closed_form(
        n in 1usize..=3,
        seed_pts in point_set(3, -2, 2, 6),
        no_good in any::<bool>(),
        single in any::<bool>(),
    ) {
        let ev: Vec<(LatticePoint, f64)> = seed_pts
            .iter()
            .map(|p| LatticePoint::new(p[..n].to_vec()))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|p| { let v = p.coords().iter().map(|c| (c * c) as f64).sum(); (p, v) })
            .collect();
        let dom = Domain::cube(n, -2, 2).unwrap();
        if let Ok(fam) = CutFamily::enumerate(&ev) {
            let k = ConstantBundle::derive(&fam, &dom, None).unwrap();
            let model = build_cpf(&fam, &dom, &k, CpfOptions { no_good, single_big_m: single });
            prop_assert_eq!(model.counts(), model.expected_counts());
            prop_assert!(k.m_lambda >= k.eps_lambda && k.eps_lambda > 0.0);
            let text = model.to_lp();
            prop_assert_eq!(write_lp(&parse_lp(&text).unwrap()), text);
        }
    }

    #[test]
    fn cone_consistent_assignments_are_feasible(pts in point_set(2, -2, 2, 5), no_good in any::<bool>()) {
        let dom = Domain::cube(2, -2, 2).unwrap();
        let f = |x: &[i64]| ((x[0] - 1) * (x[0] - 1) + (x[0] + x[1]) * (x[0] + x[1])) as f64;
        let ev: Vec<(LatticePoint, f64)> = pts.iter().map(|p| (LatticePoint::new(p.clone()), f(p))).collect();
        let Ok(fam) = CutFamily::enumerate(&ev) else { return Ok(()) };
        let l_f = -50.0;
        let k = ConstantBundle::derive(&fam, &dom, Some(l_f)).unwrap();
        let model = build_cpf(&fam, &dom, &k, CpfOptions { no_good, single_big_m: false });
        for x in dom.iter() {
            let mut eta = plp_value(&fam, x, l_f);
            if let Some((_, fv)) = ev.iter().find(|(p, _)| p.coords() == x) {
                eta = eta.max(*fv);
            }
            let a = cone_consistent_assignment(&model, &fam, x, eta);
            let r = validate_assignment(&model.linear, &a).unwrap();
            prop_assert!(r.feasible(), "x={:?} {:?}", x, r.violations);
        }
    }

    #[test]
    fn distance_epsilon_below_true_facet_distance(pts in point_set(2, -3, 3, 3)) {
        let ev: Vec<(LatticePoint, f64)> = pts.iter().map(|p| (LatticePoint::new(p.clone()), 0.0)).collect();
        prop_assume!(check_poised(&ev.iter().map(|e| e.0.clone()).collect::<Vec<_>>(), POISED_TOL).is_ok());
        let fam = CutFamily::enumerate(&ev).unwrap();
        let dom = Domain::cube(2, -3, 3).unwrap();
        let k = ConstantBundle::derive(&fam, &dom, Some(0.0)).unwrap();
        let cut = &fam.cuts[0];
        let mut min_dist = f64::INFINITY;
        let mut min_lam = f64::INFINITY;
        let mut max_lam: f64 = 0.0;
        for x in dom.iter() {
            for (l, h) in cut.facets.iter().enumerate() {
                let v = h.value(x);
                if v != 0 {
                    min_dist = min_dist.min(v.abs() as f64 / h.norm());
                    min_lam = min_lam.min(cut.barycentric(l, x).abs());
                }
                max_lam = max_lam.max(cut.barycentric(l, x).abs());
            }
        }
        prop_assert!(k.eps_distance <= min_dist + 1e-12);
        prop_assert!(k.eps_lambda <= min_lam + 1e-12);
        prop_assert!(k.m_lambda >= max_lam + k.eps_lambda - 1e-12);
    }
}
