//! Different theta for intersectional groups: repair the most
//! disadvantaged group fully and the others halfway.
//!
//! cargo run --release --example intersectional_theta

use cfa::data::{generate_synthetic, SyntheticSpec};
use cfa::metrics::{default_k_step, evaluate, k_grid, DEFAULT_THRESHOLD};
use cfa::{repair, GroupKey, ThetaPolicy};

fn main() -> cfa::Result<()> {
    let spec = SyntheticSpec::six_group_default();
    let records = generate_synthetic(&spec)?;
    let ks = k_grid(records.len(), default_k_step(records.len()));

    let policies = [
        ("uniform 0.5", ThetaPolicy::uniform(0.5)?),
        (
            "0.5, [1,2] at 1.0",
            ThetaPolicy::uniform(0.5)?.with_override(GroupKey::new(["1", "2"]), 1.0)?,
        ),
    ];
    for (name, policy) in policies {
        let res = repair(&records, &spec.features, &policy, 1.0)?;
        let report = evaluate(&res.partition, &res.ids, &res.raw_scores, &res.fair_scores, &ks, DEFAULT_THRESHOLD)?;
        println!("{name}: min NDCG {:.4}", report.min_ndcg());
        for (g, o) in res.groups.iter().zip(&report.groups) {
            println!(
                "  {:<22} theta {:.2}  fair mean {:>6.2}  crossing {:?}",
                o.label,
                g.theta,
                g.fair.mean(),
                o.crossing_rank
            );
        }
    }
    Ok(())
}
