//! Print per-iteration cut statistics for one run.
//!
//! cargo run --release --example profile_iters -- <problem> <n> <variant> [budget]

use sucil::problems::ProblemSpec;
use sucil::solver::{solve, Variant, VariantConfig};
use sucil::Domain;

fn main() {
    let a: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = a[1].parse().unwrap();
    let p = ProblemSpec::new(&a[0], n).unwrap();
    let dom = Domain::cube(n, -4, 4).unwrap();
    let mut cfg = VariantConfig::new(Variant::parse(&a[2]).unwrap()).with_start(p.default_start(&dom));
    if let Some(b) = a.get(3) {
        cfg = cfg.with_budget(b.parse().unwrap());
    }
    let c = solve(&p, &dom, &cfg).unwrap();
    for r in &c.iterations {
        println!(
            "k={:<3} S={:<3} new={:<3} total={:<8} poised={:<8} upd={:<7} prune={:<7} raised={:<7} active={:<6} l={:<10.4} u={:<8.4} {:.3}s",
            r.iteration,
            r.source_points,
            r.new_points,
            r.stats.total,
            r.stats.poised,
            r.stats.updating,
            r.stats.pruning,
            r.stats.raised,
            r.active,
            r.lower,
            r.upper,
            r.stats.wall_seconds
        );
    }
    println!("{:?} evals={} first={}", c.status, c.evaluations, c.first_opt_eval);
}
