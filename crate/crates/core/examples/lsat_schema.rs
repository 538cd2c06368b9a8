//! A law-school-shaped population (sex × race, scores 11 to 48) through the
//! repair: per-group fair means and small-group flags.
//!
//! cargo run --example lsat_schema

use cfa::data::{generate_synthetic, SyntheticSpec};
use cfa::metrics::parity_gap;
use cfa::{repair, ThetaPolicy};

fn main() -> cfa::Result<()> {
    let spec = SyntheticSpec::lsat_like();
    let records = generate_synthetic(&spec)?;
    println!("{} records", records.len());

    for theta in [0.0, 1.0] {
        let res = repair(&records, &spec.features, &ThetaPolicy::uniform(theta)?, 1.0)?;
        let gap = parity_gap(&res.fair_group_dists(), res.partition.weights())?;
        println!("\ntheta {theta}: parity gap {gap:.4}");
        for (g, group) in res.groups.iter().enumerate() {
            println!(
                "  {:<28} n {:>6}  raw mean {:>6.2}  fair mean {:>6.2}",
                res.partition.describe(g),
                group.count,
                group.raw.distribution().mean(),
                group.fair.mean()
            );
        }
    }
    Ok(())
}
