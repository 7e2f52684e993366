//! Run every benchmark problem with one variant and print evaluation counts.
//!
//! cargo run --release --example sweep -- <n> [variant] [problem,...]

use std::time::Instant;

use sucil::problems::{ProblemSpec, PROBLEMS};
use sucil::solver::{solve, Variant, VariantConfig};
use sucil::Domain;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let variant = args.next().and_then(|s| Variant::parse(&s)).unwrap_or(Variant::Sucil);
    let only: Option<Vec<String>> = args.next().map(|s| s.split(',').map(str::to_lowercase).collect());
    let dom = Domain::cube(n, -4, 4).unwrap();
    for info in PROBLEMS.iter() {
        if only.as_ref().is_some_and(|o| !o.contains(&info.name.to_lowercase())) {
            continue;
        }
        let p = ProblemSpec::new(info.name, n).unwrap();
        let cfg = VariantConfig::new(variant).with_start(p.default_start(&dom));
        let t = Instant::now();
        let c = solve(&p, &dom, &cfg).unwrap();
        let combos: u64 = c.iterations.iter().map(|r| r.stats.total).sum();
        println!(
            "{:<7} {:>5} ({:>3})  f={:<10.6} l={:<10.6} {:?} combos={} {:.2}s",
            info.name,
            c.evaluations,
            c.first_opt_eval,
            c.f_best,
            c.lower,
            c.status,
            combos,
            t.elapsed().as_secs_f64()
        );
    }
}
