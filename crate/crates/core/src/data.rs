//! Synthetic populations and CSV input / output.
//!
//! CSV files are UTF-8, comma separated, with a header row whose first
//! column is `id`. Population files carry one column per protected feature
//! followed by `score`; repaired files carry `raw_score` and `fair_score`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf};

use crate::distributions::ScoreRecord;
use crate::error::{Error, Result};

/// Columns that never name a protected feature.
const RESERVED: [&str; 4] = ["id", "score", "raw_score", "fair_score"];

/// Smallest acceptable probability that a draw lands inside the score range.
const MIN_ACCEPTANCE: f64 = 1e-3;

/// One group of a synthetic population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGroup {
    pub traits: Vec<String>,
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
}

/// Parameters of a synthetic population of rounded, truncated normal scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub features: Vec<String>,
    pub min_score: i64,
    pub max_score: i64,
    pub seed: u64,
    pub groups: Vec<SyntheticGroup>,
}

fn group(traits: [&str; 2], count: usize, mean: f64, std_dev: f64) -> SyntheticGroup {
    SyntheticGroup {
        traits: traits.iter().map(|s| s.to_string()).collect(),
        count,
        mean,
        std_dev,
    }
}

impl SyntheticSpec {
    /// 100,000 individuals, gender ∈ {0, 1} × ethnicity ∈ {0, 1, 2}, scores
    /// in [3, 88]. Groups [0,2], [1,1] and [1,2] are disadvantaged, in that
    /// order of severity.
    pub fn six_group_default() -> Self {
        Self {
            features: vec!["gender".into(), "ethnicity".into()],
            min_score: 3,
            max_score: 88,
            seed: 20_190_101,
            groups: vec![
                group(["0", "0"], 16_667, 58.0, 11.0),
                group(["0", "1"], 16_667, 56.0, 10.0),
                group(["0", "2"], 16_667, 47.0, 10.0),
                group(["1", "0"], 16_667, 57.0, 12.0),
                group(["1", "1"], 16_666, 44.0, 10.0),
                group(["1", "2"], 16_666, 36.0, 9.0),
            ],
        }
    }

    /// Law-school-shaped population: 21,792 students, gender × seven
    /// ethnicities with the published shares, scores in [11, 48].
    pub fn lsat_like() -> Self {
        const TOTAL: f64 = 21_792.0;
        let genders = [("female", 0.44), ("male", 0.56)];
        let ethnicities = [
            ("White", 0.84, 37.5, 5.0),
            ("Amerindian", 0.005, 34.0, 5.5),
            ("Asian", 0.04, 36.0, 5.5),
            ("Black", 0.06, 28.5, 5.5),
            ("Hispanic", 0.02, 32.5, 5.5),
            ("Mexican", 0.02, 33.0, 5.5),
            ("Other", 0.015, 35.0, 5.5),
        ];
        let mut groups = Vec::new();
        for (gender, gs) in genders {
            for (eth, es, mean, sd) in ethnicities {
                groups.push(SyntheticGroup {
                    traits: vec![gender.into(), eth.into()],
                    count: (TOTAL * gs * es).round() as usize,
                    mean: if gender == "male" { mean + 0.5 } else { mean - 0.5 },
                    std_dev: sd,
                });
            }
        }
        Self {
            features: vec!["sex".into(), "race".into()],
            min_score: 11,
            max_score: 48,
            seed: 1998,
            groups,
        }
    }

    pub fn population(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: Self =
            toml::from_str(s).map_err(|e| Error::SyntheticSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::SyntheticSpec(msg) => Error::SyntheticSpec(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("synthetic spec serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::SyntheticSpec(msg));
        if self.groups.is_empty() {
            return bad("no groups".into());
        }
        if self.min_score >= self.max_score {
            return bad(format!(
                "min_score {} must be below max_score {}",
                self.min_score, self.max_score
            ));
        }
        let mut seen = HashSet::new();
        for g in &self.groups {
            if g.traits.len() != self.features.len() {
                return bad(format!(
                    "group {:?} has {} traits for {} features",
                    g.traits,
                    g.traits.len(),
                    self.features.len()
                ));
            }
            if !seen.insert(&g.traits) {
                return bad(format!("group {:?} listed twice", g.traits));
            }
            if g.count == 0 {
                return bad(format!("group {:?} has count 0", g.traits));
            }
            if !(g.std_dev.is_finite() && g.std_dev > 0.0) || !g.mean.is_finite() {
                return bad(format!(
                    "group {:?}: mean {} / std_dev {} invalid",
                    g.traits, g.mean, g.std_dev
                ));
            }
            let acceptance = acceptance_probability(g, self.min_score, self.max_score);
            if acceptance < MIN_ACCEPTANCE {
                return bad(format!(
                    "group {:?}: only {acceptance:.3e} of draws fall inside [{}, {}]",
                    g.traits, self.min_score, self.max_score
                ));
            }
        }
        Ok(())
    }
}

/// Probability that a normal draw rounds into `[lo, hi]`.
fn acceptance_probability(g: &SyntheticGroup, lo: i64, hi: i64) -> f64 {
    let normal = NormalCdf::new(g.mean, g.std_dev).expect("validated parameters");
    normal.cdf(hi as f64 + 0.5) - normal.cdf(lo as f64 - 0.5)
}

/// Draw a population from `spec`.
///
/// Each group draws from its own ChaCha stream, values are rounded to the
/// nearest integer and redrawn when outside the score range. The records are
/// then shuffled and numbered, so ids carry no group information.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<ScoreRecord>> {
    spec.validate()?;
    let (lo, hi) = (spec.min_score as f64, spec.max_score as f64);
    let mut drawn: Vec<(usize, f64)> = Vec::with_capacity(spec.population());
    for (g, group) in spec.groups.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(g as u64 + 1);
        let normal = Normal::new(group.mean, group.std_dev)
            .map_err(|e| Error::SyntheticSpec(e.to_string()))?;
        let mut accepted = 0;
        while accepted < group.count {
            let x = normal.sample(&mut rng).round();
            if (lo..=hi).contains(&x) {
                drawn.push((g, x));
                accepted += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    drawn.shuffle(&mut rng);

    let width = drawn.len().to_string().len().max(6);
    Ok(drawn
        .into_iter()
        .enumerate()
        .map(|(i, (g, x))| ScoreRecord {
            id: format!("{i:0width$}"),
            traits: spec.groups[g].traits.clone(),
            raw_score: x,
        })
        .collect())
}

/// Protected-feature columns of a CSV header: everything except `id` and
/// the score columns.
pub fn read_schema(path: &Path) -> Result<Vec<String>> {
    let mut reader = open_reader(path)?;
    let headers = headers(&mut reader, path)?;
    Ok(headers
        .iter()
        .filter(|h| !RESERVED.contains(&h.as_str()))
        .cloned()
        .collect())
}

fn open_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn headers(reader: &mut csv::Reader<fs::File>, path: &Path) -> Result<Vec<String>> {
    let headers = reader.headers().map_err(|e| csv_error(path, 1, e))?;
    let headers: Vec<String> = headers.iter().map(str::to_string).collect();
    if headers.first().map(String::as_str) != Some("id") {
        return Err(Error::Schema {
            path: path.into(),
            message: "first column must be `id`".into(),
        });
    }
    Ok(headers)
}

fn csv_error(path: &Path, line: u64, e: csv::Error) -> Error {
    let line = e.position().map_or(line, |p| p.line());
    Error::Csv {
        path: path.into(),
        line,
        message: e.to_string(),
    }
}

fn column(headers: &[String], names: &[&str], path: &Path) -> Result<usize> {
    names
        .iter()
        .find_map(|n| headers.iter().position(|h| h == n))
        .ok_or_else(|| Error::Schema {
            path: path.into(),
            message: format!("missing column `{}`", names.join("` or `")),
        })
}

struct Rows {
    records: Vec<ScoreRecord>,
    fair: Vec<f64>,
}

fn read_rows(path: &Path, schema: &[String], want_fair: bool) -> Result<Rows> {
    let mut reader = open_reader(path)?;
    let headers = headers(&mut reader, path)?;
    let trait_cols = schema
        .iter()
        .map(|name| column(&headers, &[name.as_str()], path))
        .collect::<Result<Vec<_>>>()?;
    let score_col = column(&headers, &["score", "raw_score"], path)?;
    let fair_col = if want_fair {
        Some(column(&headers, &["fair_score"], path)?)
    } else {
        None
    };

    let parse = |s: &str, line: u64, what: &str| -> Result<f64> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Csv {
                path: path.into(),
                line,
                message: format!("cannot parse {what} {s:?}"),
            }),
        }
    };

    let mut records = Vec::new();
    let mut fair = Vec::new();
    let mut ids = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, 0, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(Error::Csv {
                path: path.into(),
                line,
                message: "empty id".into(),
            });
        }
        if !ids.insert(id.clone()) {
            return Err(Error::Csv {
                path: path.into(),
                line,
                message: format!("duplicate id {id:?}"),
            });
        }
        let raw_score = parse(&row[score_col], line, "score")?;
        if let Some(c) = fair_col {
            fair.push(parse(&row[c], line, "fair score")?);
        }
        records.push(ScoreRecord {
            id,
            traits: trait_cols.iter().map(|&c| row[c].to_string()).collect(),
            raw_score,
        });
    }
    Ok(Rows { records, fair })
}

/// Read a population file with the given protected-feature columns.
pub fn load_population_csv(path: &Path, schema: &[String]) -> Result<Vec<ScoreRecord>> {
    Ok(read_rows(path, schema, false)?.records)
}

/// Read a file written by [`write_repair_csv`]: records plus fair scores.
pub fn load_repair_csv(path: &Path, schema: &[String]) -> Result<(Vec<ScoreRecord>, Vec<f64>)> {
    let rows = read_rows(path, schema, true)?;
    Ok((rows.records, rows.fair))
}

fn create_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv {
            path: path.into(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

fn id_order(records: &[ScoreRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].id.cmp(&records[b].id));
    order
}

/// Write `id, <features…>, score` rows in ascending id order.
pub fn write_population_csv(path: &Path, schema: &[String], records: &[ScoreRecord]) -> Result<()> {
    let mut w = create_writer(path)?;
    let err = write_err(path);
    let mut header = vec!["id"];
    header.extend(schema.iter().map(String::as_str));
    header.push("score");
    w.write_record(&header).map_err(&err)?;
    for i in id_order(records) {
        let r = &records[i];
        let mut row = vec![r.id.clone()];
        row.extend(r.traits.iter().cloned());
        row.push(r.raw_score.to_string());
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `id, <features…>, raw_score, fair_score` rows in ascending id order.
///
/// Scores use the shortest representation that parses back to the same
/// value, so reading the file reproduces the records exactly.
pub fn write_repair_csv(
    path: &Path,
    schema: &[String],
    records: &[ScoreRecord],
    fair_scores: &[f64],
) -> Result<()> {
    if fair_scores.len() != records.len() {
        return Err(Error::MissingScore(format!(
            "{} fair scores for {} records",
            fair_scores.len(),
            records.len()
        )));
    }
    let mut w = create_writer(path)?;
    let err = write_err(path);
    let mut header = vec!["id"];
    header.extend(schema.iter().map(String::as_str));
    header.extend(["raw_score", "fair_score"]);
    w.write_record(&header).map_err(&err)?;
    for i in id_order(records) {
        let r = &records[i];
        let mut row = vec![r.id.clone()];
        row.extend(r.traits.iter().cloned());
        row.push(r.raw_score.to_string());
        row.push(fair_scores[i].to_string());
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
