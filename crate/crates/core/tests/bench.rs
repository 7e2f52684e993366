use proptest::prelude::*;
use sucil::bench::*;

fn rec(solver: &str, problem: &str, n: usize, terminate: usize, first: Option<usize>, capped: bool) -> RunRecord {
    RunRecord {
        solver: solver.into(),
        problem: problem.into(),
        n,
        terminate,
        first_opt: first,
        certified: !capped,
        capped,
        external: false,
        wall_seconds: 0.0,
        cut_stats: Vec::new(),
        error: None,
    }
}

const THIRD_PARTY: [&str; 5] = ["DFLINT", "DFLINT-M", "NOMAD", "NOMAD-dm", "MATSuMoTo"];

fn against_third_parties() -> Vec<RunRecord> {
    reference_records()
        .into_iter()
        .filter(|r| r.solver == "SUCIL" || THIRD_PARTY.contains(&r.solver.as_str()))
        .collect()
}

#[test]
fn two_solver_ratios() {
    let rs = [rec("a", "p", 3, 10, Some(1), false), rec("b", "p", 3, 20, Some(1), false)];
    let c = make_profile(&rs, Metric::Terminate, CapPolicy::Infinite).unwrap();
    assert_eq!(c[0].ratios, vec![1.0]);
    assert_eq!(c[1].ratios, vec![2.0]);
    assert_eq!(c[0].rho(1.0), 1.0);
    assert_eq!(c[1].rho(1.0), 0.0);
    assert_eq!(c[1].rho(2.0), 1.0);
}

#[test]
fn ties_count_for_every_solver() {
    let rs = [rec("a", "p", 3, 10, Some(4), false), rec("b", "p", 3, 10, Some(4), false)];
    for m in [Metric::Terminate, Metric::FirstOpt] {
        let c = make_profile(&rs, m, CapPolicy::Infinite).unwrap();
        assert!(c.iter().all(|c| c.wins() == 1 && c.rho(1.0) == 1.0));
    }
}

#[test]
fn capped_runs_are_unsolved_unless_literal() {
    let rs = [rec("a", "p", 4, 1001, Some(3), true), rec("b", "p", 4, 2000, Some(9), false)];
    let inf = make_profile(&rs, Metric::Terminate, CapPolicy::Infinite).unwrap();
    assert_eq!(inf[0].ratios, vec![f64::INFINITY]);
    assert_eq!(inf[1].ratios, vec![1.0]);
    let lit = make_profile(&rs, Metric::Terminate, CapPolicy::Literal).unwrap();
    assert_eq!(lit[0].ratios, vec![1.0]);
    let first = make_profile(&rs, Metric::FirstOpt, CapPolicy::Infinite).unwrap();
    assert_eq!(first[0].ratios, vec![1.0]);
    assert_eq!(first[1].ratios, vec![3.0]);
}

#[test]
fn missing_and_duplicate_pairs() {
    let rs = [rec("a", "p", 3, 1, None, false), rec("b", "q", 3, 1, None, false)];
    assert!(matches!(make_profile(&rs, Metric::Terminate, CapPolicy::Infinite), Err(BenchError::MissingPair { .. })));
    let rs = [rec("a", "p", 3, 1, None, false), rec("a", "p", 3, 2, None, false)];
    assert!(matches!(make_profile(&rs, Metric::Terminate, CapPolicy::Infinite), Err(BenchError::DuplicatePair { .. })));
}

#[test]
fn shipped_reference_counts() {
    let rs = reference_records();
    assert_eq!(rs.len(), 24 * 7);
    let find = |s: &str, p: &str, n: usize| rs.iter().find(|r| r.solver == s && r.problem == p && r.n == n).unwrap();
    let d = find("DFLINT", "abhi", 3);
    assert_eq!((d.terminate, d.first_opt), (161, Some(57)));
    let d = find("NOMAD", "abhi", 3);
    assert_eq!((d.terminate, d.first_opt), (59, Some(20)));
    let s = find("SUCIL", "maxq", 5);
    assert_eq!((s.terminate, s.first_opt), (80, Some(1)));
    assert!(find("DFLINT", "maxq", 4).capped);
    assert!(!find("DFLINT", "maxq", 3).capped);
    assert!(rs.iter().all(|r| r.external && r.first_opt.unwrap() <= r.terminate));
}

#[test]
fn sucil_wins_most_reference_instances() {
    let rs = against_third_parties();
    let (wins, total) = best_or_tied(&rs, "SUCIL", Metric::Terminate, CapPolicy::Infinite).unwrap();
    assert_eq!(total, 24);
    assert!(wins as f64 / total as f64 > 0.65, "{wins}/{total}");
    let (lit, _) = best_or_tied(&rs, "SUCIL", Metric::Terminate, CapPolicy::Literal).unwrap();
    assert_eq!(lit, wins);
    // reaching the optimum first is where the monotone direct search leads
    let (dm, _) = best_or_tied(&rs, "DFLINT-M", Metric::FirstOpt, CapPolicy::Infinite).unwrap();
    assert!(dm as f64 / 24.0 > 0.85, "{dm}");
}

#[test]
fn replication_means_match_summary_column() {
    let reps = shipped_replications();
    assert_eq!(reps.len(), 3 * 20 * 8);
    let means = floor_means(&reps);
    let refs = reference_records();
    let mut mismatched = Vec::new();
    for r in refs.iter().filter(|r| r.solver == "MATSuMoTo") {
        let (t, f) = means[&(r.problem.clone(), r.n)];
        if (t, Some(f)) != (r.terminate, r.first_opt) {
            mismatched.push((r.problem.as_str(), r.n));
        }
    }
    // two summary cells disagree with their own replication rows
    assert_eq!(mismatched, vec![("CB3I", 4), ("CB3II", 5)]);
}

#[test]
fn malformed_rows_report_their_line() {
    let text = "# comment\nsolver,problem,n,terminate,first_opt,capped\nA,p,3,10,2,0\nB,p,three,10,2,0\n";
    match ingest_reference(text.as_bytes()) {
        Err(BenchError::SchemaMismatch { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
    let text = "solver,problem,n,terminate,first_opt,capped\nA,p,3,10,2\n";
    assert!(matches!(ingest_reference(text.as_bytes()), Err(BenchError::SchemaMismatch { line: 2, .. })));
    let text = "solver,problem,n,N\n";
    assert!(matches!(ingest_reference(text.as_bytes()), Err(BenchError::SchemaMismatch { .. })));
}

#[test]
fn budget_of_one_caps_every_run() {
    let cfg = SuiteConfig {
        problems: vec!["quad".into(), "LQ".into()],
        dims: vec![3],
        budget: Some(1),
        ..SuiteConfig::default()
    };
    let rs = run_suite(&cfg);
    assert_eq!(rs.len(), 2 * 4);
    assert!(rs.iter().all(|r| !r.certified && r.capped && r.terminate == 1 && r.error.is_none()));
}

#[test]
fn suite_output_is_deterministic() {
    let cfg = SuiteConfig {
        problems: vec!["maxq".into(), "LQ".into()],
        dims: vec![3],
        variants: vec![sucil::solver::Variant::Sucil, sucil::solver::Variant::SucilIdeal1],
        ..SuiteConfig::default()
    };
    let csv = |jobs| {
        let rs = run_suite(&SuiteConfig { jobs, ..cfg.clone() });
        let mut a = Vec::new();
        write_records_csv(&rs, &mut a).unwrap();
        write_metric_csv(&rs, Metric::Terminate, CapPolicy::Infinite, &mut a).unwrap();
        write_profile_csv(&make_profile(&rs, Metric::FirstOpt, CapPolicy::Infinite).unwrap(), &mut a).unwrap();
        String::from_utf8(a).unwrap()
    };
    let one = csv(1);
    assert_eq!(one, csv(2));
    assert!(one.starts_with("solver,problem,n,terminate,first_opt,certified,capped,external,error\n"));
    let maxq = run_instance("maxq", 3, sucil::solver::Variant::SucilIdeal1, &SuiteConfig { budget: None, ..SuiteConfig::default() });
    assert!(maxq.certified);
    assert_eq!(maxq.first_opt, Some(1));
    assert!((10..=20).contains(&maxq.terminate), "{}", maxq.terminate);
}

#[test]
fn unknown_problem_is_recorded_not_fatal() {
    let r = run_instance("nope", 3, sucil::solver::Variant::Sucil, &SuiteConfig::default());
    assert!(r.error.is_some());
    assert_eq!(r.value(Metric::Terminate, CapPolicy::Literal), f64::INFINITY);
}

proptest! {
    #[test]
    fn profiles_are_monotone(
        counts in prop::collection::vec(prop::collection::vec((1usize..200, any::<bool>()), 3), 1..12),
        literal in any::<bool>(),
    ) {
        let mut rs = Vec::new();
        for (p, row) in counts.iter().enumerate() {
            for (s, &(v, capped)) in row.iter().enumerate() {
                rs.push(rec(&format!("s{s}"), &format!("p{p}"), 3, v, Some(v / 2 + 1), capped));
            }
        }
        let policy = if literal { CapPolicy::Literal } else { CapPolicy::Infinite };
        for m in [Metric::Terminate, Metric::FirstOpt] {
            let curves = make_profile(&rs, m, policy).unwrap();
            for c in &curves {
                prop_assert!(c.samples.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
                prop_assert!(c.samples.iter().all(|&(_, r)| (0.0..=1.0).contains(&r)));
                let finite = c.ratios.iter().filter(|r| r.is_finite()).count() as f64 / c.ratios.len() as f64;
                prop_assert_eq!(c.samples.last().unwrap().1, finite);
            }
            let solved = (0..counts.len())
                .filter(|p| rs.iter().any(|r| r.problem == format!("p{p}") && r.value(m, policy).is_finite()))
                .count();
            let wins: usize = curves.iter().map(|c| c.wins()).sum();
            prop_assert!(wins >= solved);
        }
    }
}
