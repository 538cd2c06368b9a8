//! Repair the default six-group synthetic population at theta 0, 0.5 and 1
//! and print the utility / fairness trade-off.
//!
//! cargo run --release --example repair_synthetic

use std::time::Instant;

use cfa::data::{generate_synthetic, SyntheticSpec};
use cfa::metrics::{default_k_step, evaluate, k_grid, DEFAULT_THRESHOLD};
use cfa::{repair, ThetaPolicy};

fn main() -> cfa::Result<()> {
    let spec = SyntheticSpec::six_group_default();
    let records = generate_synthetic(&spec)?;
    let n = records.len();
    let ks = k_grid(n, default_k_step(n));
    println!("{n} records, {} groups", spec.groups.len());

    for theta in [0.0, 0.5, 1.0] {
        let start = Instant::now();
        let result = repair(&records, &spec.features, &ThetaPolicy::uniform(theta)?, 1.0)?;
        let elapsed = start.elapsed();
        let report = evaluate(
            &result.partition,
            &result.ids,
            &result.raw_scores,
            &result.fair_scores,
            &ks,
            DEFAULT_THRESHOLD,
        )?;
        println!(
            "\ntheta {theta}: repair {:.2?}, E_ind {:.4}, U {:.4}, parity gap {:.3e}",
            elapsed, report.individual_fairness_error, report.utility, report.parity_gap
        );
        println!(
            "  min P@k {:.4}, min NDCG {:.4}",
            report.min_precision(),
            report.min_ndcg()
        );
        for g in &report.groups {
            let show = |c: Option<usize>| c.map_or("never".to_string(), |k| k.to_string());
            println!(
                "  {:<22} share {:.3}  crossing {:>7}",
                g.label,
                g.weight,
                show(g.crossing_rank)
            );
        }
    }
    Ok(())
}
