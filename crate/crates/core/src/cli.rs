//! The `generate`, `repair`, `evaluate` and `sweep` commands.
//!
//! Every command writes into an output directory. CSV files keep full
//! float precision; JSON files round floats to 12 significant digits.
//!
//! Output files:
//!
//! * `generate`: `population.csv`, `population_manifest.json`.
//! * `repair`: `repaired.csv`, `manifest.json`.
//! * `evaluate`: `metrics_k.csv`, `report.json`.
//! * `sweep`: `sweep.csv` plus one `theta_<θ>/` directory per θ holding the
//!   repair and evaluate outputs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::barycenter::QuantileGrid;
use crate::data::{
    generate_synthetic, load_population_csv, load_repair_csv, read_schema, write_population_csv,
    write_repair_csv, SyntheticSpec,
};
use crate::distributions::{partition_population, GroupKey, GroupPartition, ScoreRecord};
use crate::error::{Error, Result};
use crate::metrics::{self, FairnessReport, DEFAULT_THRESHOLD};
use crate::repair::{repair_with, RepairOptions, RepairResult, ThetaPolicy};

#[derive(Debug, Parser)]
#[command(name = "cfa", version, about = "Continuous fairness repair of decision scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic population and write it as CSV.
    Generate(GenerateArgs),
    /// Repair raw scores toward the group barycenter.
    Repair(RepairArgs),
    /// Compare repaired scores against raw scores.
    Evaluate(EvaluateArgs),
    /// Repair and evaluate for several uniform theta values.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Six groups, 100,000 records.
    SixGroup,
    /// Law-school-shaped population, 14 groups.
    Lsat,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Population CSV (`id`, feature columns, `score`).
    #[arg(long, conflicts_with_all = ["synthetic_spec", "preset"])]
    pub input: Option<PathBuf>,
    /// TOML synthetic population spec.
    #[arg(long, conflicts_with = "preset")]
    pub synthetic_spec: Option<PathBuf>,
    /// Built-in synthetic population, used when no input is given.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Overrides the seed of a synthetic spec.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RepairParams {
    /// Width of the score bins.
    #[arg(long, default_value_t = 1.0)]
    pub bin_width: f64,
    /// Default theta for every group.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Per-group theta, `feature=value[,feature=value]:theta`; later
    /// selectors win.
    #[arg(long = "theta-group")]
    pub theta_group: Vec<String>,
    /// Barycenter quantile grid: `exact` or a number of levels.
    #[arg(long)]
    pub grid: Option<String>,
    /// Round fair scores to integers.
    #[arg(long)]
    pub round: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalParams {
    /// Step of the k grid; defaults to 1,000 from 50,000 records, else 100.
    #[arg(long)]
    pub k_step: Option<usize>,
    /// Disparity threshold for crossing ranks.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RepairArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: RepairParams,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Raw population CSV; optional since `repaired.csv` keeps raw scores.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `repaired.csv` written by `repair`.
    #[arg(long)]
    pub repaired: PathBuf,
    #[command(flatten)]
    pub eval: EvalParams,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: RepairParams,
    #[command(flatten)]
    pub eval: EvalParams,
    /// Comma separated theta values.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    pub thetas: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

impl Error {
    /// Process exit code: 1 usage, 2 data, 3 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Theta(_)
            | Error::BinWidth(_)
            | Error::RankCutoff { .. }
            | Error::Probability(_) => 1,
            Error::Invariant(_) | Error::Marginal(_) => 3,
            _ => 2,
        }
    }
}

/// Parse arguments, run, report errors on stderr and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Generate(args) => cmd_generate(args),
        Command::Repair(args) => cmd_repair(args).map(drop),
        Command::Evaluate(args) => cmd_evaluate(args).map(drop),
        Command::Sweep(args) => cmd_sweep(args).map(drop),
    }
}

/// A loaded population and how it was obtained.
pub struct Population {
    pub schema: Vec<String>,
    pub records: Vec<ScoreRecord>,
    pub source: Value,
}

impl SourceArgs {
    fn spec(&self) -> Result<SyntheticSpec> {
        let mut spec = match (&self.synthetic_spec, self.preset) {
            (Some(path), _) => SyntheticSpec::load(path)?,
            (None, Some(Preset::Lsat)) => SyntheticSpec::lsat_like(),
            (None, _) => SyntheticSpec::six_group_default(),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        Ok(spec)
    }

    pub fn load(&self) -> Result<Population> {
        if let Some(path) = &self.input {
            let schema = read_schema(path)?;
            let records = load_population_csv(path, &schema)?;
            return Ok(Population {
                schema,
                records,
                source: json!({ "kind": "csv", "path": path }),
            });
        }
        let spec = self.spec()?;
        let records = generate_synthetic(&spec)?;
        Ok(Population {
            schema: spec.features.clone(),
            records,
            source: json!({ "kind": "synthetic", "seed": spec.seed, "spec": spec }),
        })
    }
}

fn parse_grid(s: Option<&str>) -> Result<Option<QuantileGrid>> {
    match s {
        None => Ok(None),
        Some("exact") => Ok(Some(QuantileGrid::Exact)),
        Some(n) => match n.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(QuantileGrid::Uniform(n))),
            _ => Err(Error::Config(format!("grid must be `exact` or a positive integer, got {n:?}"))),
        },
    }
}

/// A parsed `--theta-group` argument.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSelector {
    pub conditions: Vec<(String, String)>,
    pub theta: f64,
}

impl ThetaSelector {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("theta group {s:?} is not `feature=value[,feature=value]:theta`"));
        let (lhs, theta) = s.rsplit_once(':').ok_or_else(bad)?;
        let theta: f64 = theta.trim().parse().map_err(|_| bad())?;
        let conditions = lhs
            .split(',')
            .map(|c| {
                let (f, v) = c.split_once('=').ok_or_else(bad)?;
                let (f, v) = (f.trim(), v.trim());
                if f.is_empty() {
                    return Err(bad());
                }
                Ok((f.to_string(), v.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { conditions, theta })
    }

    fn matches(&self, schema: &[String], key: &GroupKey) -> bool {
        self.conditions.iter().all(|(f, v)| {
            schema
                .iter()
                .position(|s| s == f)
                .is_some_and(|i| &key.values()[i] == v)
        })
    }
}

/// Resolve a default theta and selectors against the groups present.
pub fn theta_policy(
    partition: &GroupPartition,
    default_theta: f64,
    selectors: &[String],
) -> Result<ThetaPolicy> {
    let mut policy = ThetaPolicy::uniform(default_theta)?;
    for raw in selectors {
        let sel = ThetaSelector::parse(raw)?;
        if let Some((f, _)) = sel.conditions.iter().find(|(f, _)| !partition.schema().contains(f)) {
            return Err(Error::Config(format!("theta group {raw:?}: unknown feature {f:?}")));
        }
        let mut hit = false;
        for key in partition.keys() {
            if sel.matches(partition.schema(), key) {
                policy = policy.with_override(key.clone(), sel.theta)?;
                hit = true;
            }
        }
        if !hit {
            return Err(Error::Config(format!("theta group {raw:?} matches no group")));
        }
    }
    Ok(policy)
}

/// Round to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.11e}").parse().unwrap_or(x)
    } else {
        x
    }
}

fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round12(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn write_json(path: &Path, value: Value) -> Result<()> {
    let text = serde_json::to_string_pretty(&round_floats(value))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn traits_object(schema: &[String], key: &GroupKey) -> Value {
    Value::Object(
        schema
            .iter()
            .zip(key.values())
            .map(|(f, v)| (f.clone(), Value::String(v.clone())))
            .collect::<Map<_, _>>(),
    )
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    if args.source.input.is_some() {
        return Err(Error::Config("generate takes a synthetic spec, not --input".into()));
    }
    let spec = args.source.spec()?;
    let records = generate_synthetic(&spec)?;
    create_dir(&args.out)?;
    write_population_csv(&args.out.join("population.csv"), &spec.features, &records)?;

    let partition = partition_population(&records, &spec.features)?;
    let groups: Vec<Value> = (0..partition.num_groups())
        .map(|g| {
            let members = partition.members(g);
            let mean = members.iter().map(|&i| records[i].raw_score).sum::<f64>() / members.len() as f64;
            json!({
                "traits": traits_object(&spec.features, &partition.keys()[g]),
                "count": members.len(),
                "weight": partition.weight(g),
                "mean": mean,
            })
        })
        .collect();
    write_json(
        &args.out.join("population_manifest.json"),
        json!({
            "command": "generate",
            "seed": spec.seed,
            "population": records.len(),
            "spec": spec,
            "groups": groups,
        }),
    )
}

fn repair_options(params: &RepairParams) -> Result<RepairOptions> {
    Ok(RepairOptions {
        bin_width: params.bin_width,
        grid: parse_grid(params.grid.as_deref())?,
        round_fair: params.round,
    })
}

/// Within-group order must survive the repair.
fn check_monotone(result: &RepairResult) -> Result<()> {
    for g in 0..result.partition.num_groups() {
        let mut members = result.partition.members(g).to_vec();
        members.sort_by(|&a, &b| result.raw_scores[a].total_cmp(&result.raw_scores[b]));
        for w in members.windows(2) {
            if result.fair_scores[w[0]] > result.fair_scores[w[1]] {
                return Err(Error::Invariant(format!(
                    "group {}: fair scores of {:?} and {:?} are out of order",
                    result.partition.describe(g),
                    result.ids[w[0]],
                    result.ids[w[1]]
                )));
            }
        }
    }
    Ok(())
}

fn repair_population(
    pop: &Population,
    theta: f64,
    params: &RepairParams,
) -> Result<(RepairResult, f64)> {
    let partition = partition_population(&pop.records, &pop.schema)?;
    let policy = theta_policy(&partition, theta, &params.theta_group)?;
    let result = repair_with(&pop.records, &pop.schema, &policy, &repair_options(params)?)?;
    check_monotone(&result)?;
    let gap = metrics::parity_gap(&result.fair_group_dists(), result.partition.weights())?;
    Ok((result, gap))
}

fn repair_manifest(pop: &Population, params: &RepairParams, result: &RepairResult, gap: f64) -> Value {
    let b = &result.barycenter;
    let q = |p: f64| b.quantile(p).ok();
    let groups: Vec<Value> = result
        .groups
        .iter()
        .map(|g| {
            json!({
                "traits": traits_object(&pop.schema, &g.key),
                "label": result.partition.describe(result.partition.index_of(&g.key).unwrap_or(0)),
                "theta": g.theta,
                "weight": g.weight,
                "count": g.count,
                "bins": g.raw.bins().len(),
                "raw_mean": g.raw.distribution().mean(),
                "fair_mean": g.fair.mean(),
                "fair_std_dev": g.fair.variance().sqrt(),
            })
        })
        .collect();
    let small: Vec<String> = result
        .small_groups
        .iter()
        .filter_map(|k| result.partition.index_of(k))
        .map(|g| result.partition.describe(g))
        .collect();
    json!({
        "command": "repair",
        "source": pop.source,
        "features": pop.schema,
        "population": result.ids.len(),
        "bin_width": result.bin_width,
        "grid": result.grid,
        "round_fair": params.round,
        "theta_default": params.theta,
        "theta_group": params.theta_group,
        "groups": groups,
        "barycenter": {
            "atoms": b.len(),
            "mean": b.mean(),
            "std_dev": b.variance().sqrt(),
            "min": b.min(),
            "max": b.max(),
            "quantiles": {
                "p10": q(0.1), "p25": q(0.25), "p50": q(0.5), "p75": q(0.75), "p90": q(0.9),
            },
        },
        "parity_gap": gap,
        "grid_resolution": result.grid_resolution(),
        "small_groups": small,
    })
}

fn write_repair_outputs(dir: &Path, pop: &Population, params: &RepairParams, result: &RepairResult, gap: f64) -> Result<()> {
    create_dir(dir)?;
    write_repair_csv(&dir.join("repaired.csv"), &pop.schema, &pop.records, &result.fair_scores)?;
    write_json(&dir.join("manifest.json"), repair_manifest(pop, params, result, gap))
}

pub fn cmd_repair(args: &RepairArgs) -> Result<RepairResult> {
    let pop = args.source.load()?;
    let (result, gap) = repair_population(&pop, args.params.theta, &args.params)?;
    for key in &result.small_groups {
        if let Some(g) = result.partition.index_of(key) {
            eprintln!("warning: group {} has fewer than {} members", result.partition.describe(g), crate::repair::SMALL_GROUP);
        }
    }
    write_repair_outputs(&args.out, &pop, &args.params, &result, gap)?;
    Ok(result)
}

/// Scores paired for evaluation, in a common record order.
struct Paired {
    partition: GroupPartition,
    ids: Vec<String>,
    raw: Vec<f64>,
    fair: Vec<f64>,
}

fn load_pair(raw_path: Option<&Path>, repaired: &Path) -> Result<Paired> {
    let schema = read_schema(repaired)?;
    let (records, fair) = load_repair_csv(repaired, &schema)?;
    if let Some(raw_path) = raw_path {
        let raw_records = load_population_csv(raw_path, &schema)?;
        if raw_records.len() != records.len() {
            return Err(Error::IdMismatch(format!(
                "{} has {} records, {} has {}",
                raw_path.display(),
                raw_records.len(),
                repaired.display(),
                records.len()
            )));
        }
        let by_id: std::collections::HashMap<&str, &ScoreRecord> =
            raw_records.iter().map(|r| (r.id.as_str(), r)).collect();
        for r in &records {
            match by_id.get(r.id.as_str()) {
                None => {
                    return Err(Error::IdMismatch(format!(
                        "id {:?} missing from {}",
                        r.id,
                        raw_path.display()
                    )))
                }
                Some(raw) if raw.raw_score != r.raw_score || raw.traits != r.traits => {
                    return Err(Error::IdMismatch(format!("record {:?} differs between files", r.id)))
                }
                Some(_) => {}
            }
        }
    }
    let partition = partition_population(&records, &schema)?;
    Ok(Paired {
        partition,
        ids: records.iter().map(|r| r.id.clone()).collect(),
        raw: records.iter().map(|r| r.raw_score).collect(),
        fair,
    })
}

fn evaluate_scores(p: &Paired, eval: &EvalParams) -> Result<FairnessReport> {
    let n = p.ids.len();
    let step = eval.k_step.unwrap_or_else(|| metrics::default_k_step(n));
    if step == 0 {
        return Err(Error::Config("k step must be positive".into()));
    }
    let ks = metrics::k_grid(n, step);
    metrics::evaluate(&p.partition, &p.ids, &p.raw, &p.fair, &ks, eval.threshold)
}

/// Smallest grid cutoff from which every group meets the threshold, i.e. the
/// largest per-group crossing rank; `None` if some group never crosses.
pub fn min_crossing_rank(report: &FairnessReport) -> Option<usize> {
    report
        .groups
        .iter()
        .map(|g| g.crossing_rank)
        .try_fold(0, |acc, c| c.map(|c| acc.max(c)))
}

fn write_evaluation(dir: &Path, p: &Paired, eval: &EvalParams, report: &FairnessReport) -> Result<()> {
    create_dir(dir)?;
    let path = dir.join("metrics_k.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e: csv::Error| Error::Csv {
        path: path.clone(),
        line: 0,
        message: e.to_string(),
    };
    let mut header = vec!["k".to_string(), "precision".into(), "ndcg".into()];
    for g in &report.groups {
        let label = g.label.replace(',', "/");
        header.push(format!("share:{label}"));
        header.push(format!("disparity:{label}"));
    }
    w.write_record(&header).map_err(err)?;
    for (j, k) in report.k_grid.iter().enumerate() {
        let mut row = vec![k.to_string(), report.precision[j].to_string(), report.ndcg[j].to_string()];
        for g in &report.groups {
            row.push(g.selected_share[j].to_string());
            row.push(g.disparity[j].to_string());
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let groups: Vec<Value> = report
        .groups
        .iter()
        .enumerate()
        .map(|(g, o)| {
            json!({
                "traits": traits_object(p.partition.schema(), &p.partition.keys()[g]),
                "label": o.label,
                "weight": o.weight,
                "count": o.count,
                "crossing_rank": o.crossing_rank,
                "raw_crossing_rank": o.raw_crossing_rank,
            })
        })
        .collect();
    write_json(
        &dir.join("report.json"),
        json!({
            "command": "evaluate",
            "population": p.ids.len(),
            "k_step": report.k_grid.get(1).map_or(report.k_grid[0], |k| k - report.k_grid[0]),
            "k_points": report.k_grid.len(),
            "threshold": eval.threshold,
            "individual_fairness_error": report.individual_fairness_error,
            "utility": report.utility,
            "parity_gap": report.parity_gap,
            "min_precision": report.min_precision(),
            "min_ndcg": report.min_ndcg(),
            "min_crossing_rank": min_crossing_rank(report),
            "groups": groups,
        }),
    )
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<FairnessReport> {
    let pair = load_pair(args.input.as_deref(), &args.repaired)?;
    let report = evaluate_scores(&pair, &args.eval)?;
    write_evaluation(&args.out, &pair, &args.eval, &report)?;
    Ok(report)
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub individual_fairness_error: f64,
    pub utility: f64,
    pub parity_gap: f64,
    pub min_crossing_rank: Option<usize>,
}

fn theta_dir_name(theta: f64) -> String {
    format!("theta_{theta}")
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let mut thetas = args.thetas.clone();
    if thetas.is_empty() {
        return Err(Error::Config("no theta values".into()));
    }
    if let Some(&t) = thetas.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Theta(t));
    }
    thetas.sort_by(f64::total_cmp);
    if thetas.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("duplicate theta values".into()));
    }
    let pop = args.source.load()?;
    create_dir(&args.out)?;

    let rows = thetas
        .par_iter()
        .map(|&theta| {
            let (result, gap) = repair_population(&pop, theta, &args.params)?;
            let dir = args.out.join(theta_dir_name(theta));
            write_repair_outputs(&dir, &pop, &args.params, &result, gap)?;
            let pair = Paired {
                partition: result.partition,
                ids: result.ids,
                raw: result.raw_scores,
                fair: result.fair_scores,
            };
            let report = evaluate_scores(&pair, &args.eval)?;
            write_evaluation(&dir, &pair, &args.eval, &report)?;
            Ok(SweepRow {
                theta,
                individual_fairness_error: report.individual_fairness_error,
                utility: report.utility,
                parity_gap: report.parity_gap,
                min_crossing_rank: min_crossing_rank(&report),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let path = args.out.join("sweep.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e: csv::Error| Error::Csv {
        path: path.clone(),
        line: 0,
        message: e.to_string(),
    };
    w.write_record(["theta", "individual_fairness_error", "utility", "parity_gap", "min_crossing_rank"])
        .map_err(err)?;
    for r in &rows {
        w.write_record([
            r.theta.to_string(),
            r.individual_fairness_error.to_string(),
            r.utility.to_string(),
            r.parity_gap.to_string(),
            r.min_crossing_rank.map_or(String::new(), |k| k.to_string()),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}
