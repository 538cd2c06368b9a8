//! Optimal transport between two score distributions on the line.
//!
//! cargo run --example transport_1d

use cfa::{map_from_plan, optimal_plan_1d, pushforward, wasserstein2, EmpiricalDistribution};

fn main() -> cfa::Result<()> {
    let source = EmpiricalDistribution::uniform(&[10.0, 20.0, 30.0])?;
    let target = EmpiricalDistribution::from_weighted([(15.0, 0.5), (40.0, 0.25), (55.0, 0.25)])?;

    let plan = optimal_plan_1d(&source, &target);
    println!("coupling (source -> target: mass)");
    for (x, y, m) in plan.triples() {
        println!("  {x:>5} -> {y:>5}: {m:.4}");
    }
    println!("monotone: {}, cost {:.4}", plan.is_monotone(), plan.cost());
    println!("W2 = {:.4}", wasserstein2(&source, &target));

    let map = map_from_plan(&plan, &source)?;
    println!("\nbarycentric projection");
    for &(s, t) in map.knots() {
        println!("  {s:>5} -> {t:.4}");
    }
    let image = pushforward(&source, &map);
    println!("mean preserved: {} == {}", image.mean(), target.mean());
    Ok(())
}
