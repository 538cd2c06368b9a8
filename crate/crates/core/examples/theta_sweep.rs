//! Run the `sweep` command on a small synthetic population and print the
//! trade-off table it writes.
//!
//! cargo run --example theta_sweep

use cfa::cli::{cmd_sweep, EvalParams, RepairParams, SourceArgs, SweepArgs};

fn main() -> cfa::Result<()> {
    let out = std::env::temp_dir().join("cfa_theta_sweep");
    let args = SweepArgs {
        source: SourceArgs {
            input: None,
            synthetic_spec: Some(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/small_population.toml").into()),
            preset: None,
            seed: None,
        },
        params: RepairParams {
            bin_width: 1.0,
            theta: 1.0,
            theta_group: vec![],
            grid: None,
            round: false,
        },
        eval: EvalParams {
            k_step: None,
            threshold: 0.8,
        },
        thetas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        out: out.clone(),
    };
    let rows = cmd_sweep(&args)?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "theta", "E_ind", "U", "parity", "crossing");
    for r in rows {
        let crossing = r.min_crossing_rank.map_or("-".into(), |k| k.to_string());
        println!(
            "{:>6} {:>10.4} {:>10.4} {:>10.4} {:>10}",
            r.theta, r.individual_fairness_error, r.utility, r.parity_gap, crossing
        );
    }
    println!("\noutputs in {}", out.display());
    Ok(())
}
