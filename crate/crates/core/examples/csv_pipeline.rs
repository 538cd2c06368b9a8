//! File-based pipeline: write a population CSV, repair it, evaluate the
//! result, all through the command functions the `cfa` binary uses.
//!
//! cargo run --example csv_pipeline

use std::fs;

use cfa::cli::{cmd_evaluate, cmd_repair, EvalParams, EvaluateArgs, RepairArgs, RepairParams, SourceArgs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("cfa_csv_pipeline");
    fs::create_dir_all(&dir)?;
    let input = dir.join("population.csv");
    let mut csv = String::from("id,school,score\n");
    for i in 0..300 {
        csv += &format!("n{i:03},north,{}\n", 40 + (i * 13) % 45);
        csv += &format!("s{i:03},south,{}\n", 25 + (i * 17) % 40);
    }
    fs::write(&input, csv)?;

    let repaired = cmd_repair(&RepairArgs {
        source: SourceArgs {
            input: Some(input.clone()),
            synthetic_spec: None,
            preset: None,
            seed: None,
        },
        params: RepairParams {
            bin_width: 1.0,
            theta: 0.8,
            theta_group: vec!["school=south:1.0".into()],
            grid: None,
            round: false,
        },
        out: dir.clone(),
    })?;
    for g in &repaired.groups {
        println!("{}: theta {}, raw mean {:.2} -> fair mean {:.2}", g.key, g.theta, g.raw.distribution().mean(), g.fair.mean());
    }

    let report = cmd_evaluate(&EvaluateArgs {
        input: Some(input),
        repaired: dir.join("repaired.csv"),
        eval: EvalParams {
            k_step: Some(50),
            threshold: 0.8,
        },
        out: dir.clone(),
    })?;
    println!("E_ind {:.4}, U {:.4}, min NDCG {:.4}", report.individual_fairness_error, report.utility, report.min_ndcg());
    println!("files: {}", dir.display());
    Ok(())
}
