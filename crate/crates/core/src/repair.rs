//! Per-group `theta` repair of a scored population.
//!
//! Pipeline: partition the records by trait vector, bin each group's raw
//! scores, compute the barycenter of the group distributions with the
//! population weights, then move every individual a fraction `theta_k` of
//! the way from their raw score to the barycenter position of their bin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::barycenter::{barycenter, QuantileGrid};
use crate::distributions::{
    partition_population, BinnedScores, EmpiricalDistribution, GroupKey, GroupPartition,
    ScoreRecord,
};
use crate::error::{Error, Result};
use crate::transport::MonotoneMap;

/// Groups smaller than this are repaired but flagged.
pub const SMALL_GROUP: usize = 30;

fn check_theta(theta: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&theta) {
        Ok(theta)
    } else {
        Err(Error::Theta(theta))
    }
}

/// Fairness parameter per group: a default plus explicit overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPolicy {
    default_theta: f64,
    overrides: BTreeMap<GroupKey, f64>,
}

impl ThetaPolicy {
    pub fn uniform(theta: f64) -> Result<Self> {
        Ok(Self {
            default_theta: check_theta(theta)?,
            overrides: BTreeMap::new(),
        })
    }

    pub fn with_override(mut self, key: GroupKey, theta: f64) -> Result<Self> {
        self.overrides.insert(key, check_theta(theta)?);
        Ok(self)
    }

    pub fn default_theta(&self) -> f64 {
        self.default_theta
    }

    pub fn overrides(&self) -> &BTreeMap<GroupKey, f64> {
        &self.overrides
    }

    pub fn theta_for(&self, key: &GroupKey) -> f64 {
        self.overrides.get(key).copied().unwrap_or(self.default_theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairOptions {
    pub bin_width: f64,
    /// Barycenter grid; `None` means one node per individual (capped).
    pub grid: Option<QuantileGrid>,
    /// Round fair scores to the nearest integer.
    pub round_fair: bool,
}

impl Default for RepairOptions {
    fn default() -> Self {
        Self {
            bin_width: 1.0,
            grid: None,
            round_fair: false,
        }
    }
}

/// The repair of one group.
#[derive(Debug, Clone)]
pub struct GroupRepair {
    pub key: GroupKey,
    pub theta: f64,
    pub weight: f64,
    pub count: usize,
    /// Binned raw scores; the distribution is the group's `μ_k`.
    pub raw: BinnedScores,
    /// Optimal map from the bin representatives onto the barycenter.
    pub to_barycenter: MonotoneMap,
    /// `(1 − θ)·Id + θ·T` on the bin representatives.
    pub map: MonotoneMap,
    /// Distribution of the group's fair scores, `ν_k`.
    pub fair: EmpiricalDistribution,
}

impl GroupRepair {
    /// Fair score of an individual of this group with score `raw`.
    ///
    /// The identity part of the interpolation acts on the raw score itself,
    /// the transport part on the individual's bin, so `theta = 0` returns
    /// `raw` unchanged and all members of a bin share the transport target.
    pub fn fair_score(&self, raw: f64) -> Result<f64> {
        let bin = self
            .raw
            .locate(raw)
            .ok_or(Error::OutsideSupport { score: raw })?;
        let target = self.to_barycenter.knots()[bin].1;
        Ok(if self.theta == 0.0 {
            raw
        } else if self.theta == 1.0 {
            target
        } else {
            (1.0 - self.theta) * raw + self.theta * target
        })
    }
}

#[derive(Debug, Clone)]
pub struct RepairResult {
    pub partition: GroupPartition,
    pub ids: Vec<String>,
    pub raw_scores: Vec<f64>,
    /// Fair score per input record, same order as the input.
    pub fair_scores: Vec<f64>,
    /// Indexed like `partition.keys()`.
    pub groups: Vec<GroupRepair>,
    pub barycenter: EmpiricalDistribution,
    pub grid: QuantileGrid,
    /// `Σ_k w_k ν_k`.
    pub aggregate_fair: EmpiricalDistribution,
    pub small_groups: Vec<GroupKey>,
    pub bin_width: f64,
}

impl RepairResult {
    pub fn fair_score_map(&self) -> BTreeMap<&str, f64> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.fair_scores.iter().copied())
            .collect()
    }

    pub fn group(&self, key: &GroupKey) -> Option<&GroupRepair> {
        self.partition.index_of(key).map(|g| &self.groups[g])
    }

    /// Coarsest spacing of the discrete repair: the bin width or the largest
    /// gap between adjacent barycenter atoms, whichever is larger.
    pub fn grid_resolution(&self) -> f64 {
        self.barycenter
            .support()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(self.bin_width, f64::max)
    }

    pub fn fair_group_dists(&self) -> Vec<EmpiricalDistribution> {
        self.groups.iter().map(|g| g.fair.clone()).collect()
    }
}

/// Repair with the default options and the given bin width.
pub fn repair(
    records: &[ScoreRecord],
    schema: &[String],
    policy: &ThetaPolicy,
    bin_width: f64,
) -> Result<RepairResult> {
    repair_with(
        records,
        schema,
        policy,
        &RepairOptions {
            bin_width,
            ..RepairOptions::default()
        },
    )
}

pub fn repair_with(
    records: &[ScoreRecord],
    schema: &[String],
    policy: &ThetaPolicy,
    options: &RepairOptions,
) -> Result<RepairResult> {
    let partition = partition_population(records, schema)?;
    for key in policy.overrides().keys() {
        if partition.index_of(key).is_none() {
            return Err(Error::Config(format!("theta override for unknown group {key}")));
        }
    }

    let binned = (0..partition.num_groups())
        .map(|g| {
            let values: Vec<f64> = partition
                .members(g)
                .iter()
                .map(|&i| records[i].raw_score)
                .collect();
            BinnedScores::new(&values, options.bin_width)
        })
        .collect::<Result<Vec<_>>>()?;

    let grid = options
        .grid
        .unwrap_or_else(|| QuantileGrid::for_population(records.len()));
    let dists: Vec<EmpiricalDistribution> =
        binned.iter().map(|b| b.distribution().clone()).collect();
    let bary = barycenter(&dists, partition.weights(), grid)?;

    let mut small_groups = Vec::new();
    let mut groups = Vec::with_capacity(partition.num_groups());
    for (g, (raw, to_barycenter)) in binned.into_iter().zip(bary.maps).enumerate() {
        let key = partition.keys()[g].clone();
        let count = partition.count(g);
        if count < SMALL_GROUP {
            log::warn!(
                "group {} has only {count} members; transport on small groups is coarse",
                partition.describe(g)
            );
            small_groups.push(key.clone());
        }
        let theta = policy.theta_for(&key);
        let map = to_barycenter.interpolate(theta);
        groups.push(GroupRepair {
            key,
            theta,
            weight: partition.weight(g),
            count,
            raw,
            to_barycenter,
            map,
            // filled below
            fair: dists[g].clone(),
        });
    }

    let mut fair_scores = vec![0.0; records.len()];
    for (i, record) in records.iter().enumerate() {
        let mut fair = groups[partition.group_of(i)].fair_score(record.raw_score)?;
        if options.round_fair {
            fair = fair.round();
        }
        fair_scores[i] = fair;
    }

    for (g, group) in groups.iter_mut().enumerate() {
        let values: Vec<f64> = partition
            .members(g)
            .iter()
            .map(|&i| fair_scores[i])
            .collect();
        group.fair = EmpiricalDistribution::uniform(&values)?;
    }
    let aggregate_fair =
        EmpiricalDistribution::mixture(groups.iter().map(|g| (&g.fair, g.weight)))?;

    Ok(RepairResult {
        ids: records.iter().map(|r| r.id.clone()).collect(),
        raw_scores: records.iter().map(|r| r.raw_score).collect(),
        partition,
        fair_scores,
        groups,
        barycenter: bary.barycenter,
        grid,
        aggregate_fair,
        small_groups,
        bin_width: options.bin_width,
    })
}

/// Look up the fair score of `raw_score` among the knots of `map`.
///
/// The score must coincide with a knot source; anything else means the map
/// was built for a different group or binning.
pub fn apply_map_to_individual(raw_score: f64, map: &MonotoneMap) -> Result<f64> {
    map.lookup(raw_score)
        .ok_or(Error::OutsideSupport { score: raw_score })
}
