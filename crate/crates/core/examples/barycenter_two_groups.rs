//! Barycenter of two translated score distributions and the halfway
//! interpolation of each group toward it.
//!
//! cargo run --example barycenter_two_groups

use cfa::{barycenter, displacement_interpolate, EmpiricalDistribution, QuantileGrid};

fn main() -> cfa::Result<()> {
    let shape = [1.0, 3.0, 6.0, 3.0, 1.0];
    let low = EmpiricalDistribution::from_weighted(
        shape.iter().enumerate().map(|(i, &m)| (i as f64 * 0.125, m)),
    )?;
    let high = low.translate(0.5);

    let res = barycenter(&[low.clone(), high.clone()], &[0.5, 0.5], QuantileGrid::Exact)?;
    let b = &res.barycenter;
    println!("barycenter: [{}, {}], mean {}", b.min(), b.max(), b.mean());
    for (x, m) in b.atoms() {
        println!("  {x:.4}  {}", "#".repeat((m * 60.0).round() as usize));
    }

    for (name, group, map) in [("low", &low, &res.maps[0]), ("high", &high, &res.maps[1])] {
        for theta in [0.0, 0.5, 1.0] {
            let (_, moved) = displacement_interpolate(group, map, theta)?;
            println!("{name:>4} theta {theta}: mean {:.4}", moved.mean());
        }
    }
    Ok(())
}
