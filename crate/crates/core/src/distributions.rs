//! Populations, group partitions and weighted empirical score distributions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One scored individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    /// Protected-feature values, one per schema column.
    pub traits: Vec<String>,
    pub raw_score: f64,
}

impl ScoreRecord {
    pub fn new<I, S>(id: impl Into<String>, traits: I, raw_score: f64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            id: id.into(),
            traits: traits.into_iter().map(Into::into).collect(),
            raw_score,
        }
    }
}

/// The combination of protected-feature values shared by one group.
///
/// Ordering is lexicographic over the values, which fixes the group order
/// everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey(pub Vec<String>);

impl GroupKey {
    pub fn new<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(values.into_iter().map(Into::into).collect())
    }

    pub fn values(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.join(","))
    }
}

/// A population split into groups by protected-trait vector.
#[derive(Debug, Clone)]
pub struct GroupPartition {
    schema: Vec<String>,
    keys: Vec<GroupKey>,
    members: Vec<Vec<usize>>,
    weights: Vec<f64>,
    assignment: Vec<usize>,
}

impl GroupPartition {
    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    /// Group keys in lexicographic order.
    pub fn keys(&self) -> &[GroupKey] {
        &self.keys
    }

    pub fn num_groups(&self) -> usize {
        self.keys.len()
    }

    pub fn population(&self) -> usize {
        self.assignment.len()
    }

    pub fn index_of(&self, key: &GroupKey) -> Option<usize> {
        self.keys.binary_search(key).ok()
    }

    /// Record indices of group `g`, ascending.
    pub fn members(&self, g: usize) -> &[usize] {
        &self.members[g]
    }

    pub fn count(&self, g: usize) -> usize {
        self.members[g].len()
    }

    /// `w_k = |X_k| / |X|`.
    pub fn weight(&self, g: usize) -> f64 {
        self.weights[g]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Group index of record `i`.
    pub fn group_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn weight_map(&self) -> BTreeMap<GroupKey, f64> {
        self.keys.iter().cloned().zip(self.weights.iter().copied()).collect()
    }

    /// `gender=0,ethnicity=2` style label.
    pub fn describe(&self, g: usize) -> String {
        self.schema
            .iter()
            .zip(self.keys[g].values())
            .map(|(name, value)| format!("{name}={value}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Split `records` into groups keyed by their trait vectors.
pub fn partition_population(records: &[ScoreRecord], schema: &[String]) -> Result<GroupPartition> {
    if records.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let mut groups: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
    for (i, record) in records.iter().enumerate() {
        if record.traits.len() != schema.len() {
            return Err(Error::TraitLength {
                id: record.id.clone(),
                expected: schema.len(),
                found: record.traits.len(),
            });
        }
        if !record.raw_score.is_finite() {
            return Err(Error::NonFinite {
                value: record.raw_score,
                context: format!("raw score of {:?}", record.id),
            });
        }
        groups
            .entry(GroupKey(record.traits.clone()))
            .or_default()
            .push(i);
    }

    let n = records.len() as f64;
    let mut assignment = vec![0; records.len()];
    let mut keys = Vec::with_capacity(groups.len());
    let mut members = Vec::with_capacity(groups.len());
    let mut weights = Vec::with_capacity(groups.len());
    for (g, (key, idx)) in groups.into_iter().enumerate() {
        for &i in &idx {
            assignment[i] = g;
        }
        weights.push(idx.len() as f64 / n);
        keys.push(key);
        members.push(idx);
    }
    Ok(GroupPartition {
        schema: schema.to_vec(),
        keys,
        members,
        weights,
        assignment,
    })
}

/// Index of the half-open bin `[i·w, (i+1)·w)` holding `value`.
pub fn bin_index(value: f64, bin_width: f64) -> i64 {
    (value / bin_width).floor() as i64
}

/// Center of bin `index`.
pub fn bin_center(index: i64, bin_width: f64) -> f64 {
    index as f64 * bin_width + bin_width / 2.0
}

fn check_bin_width(bin_width: f64) -> Result<()> {
    if bin_width.is_finite() && bin_width > 0.0 {
        Ok(())
    } else {
        Err(Error::BinWidth(bin_width))
    }
}

/// A finitely supported probability measure on the real line.
///
/// Support points are strictly increasing and every mass is positive; masses
/// are normalised to sum to one on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    support: Vec<f64>,
    masses: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Build from `(point, mass)` pairs in any order. Equal points are merged
    /// and zero-mass points dropped.
    pub fn from_weighted<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        for &(x, m) in &atoms {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    value: x,
                    context: "support point".into(),
                });
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidDistribution(format!("mass {m} at {x}")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut masses: Vec<f64> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            if m == 0.0 {
                continue;
            }
            // -0.0 and 0.0 are one point
            if support.last().is_some_and(|&last| last == x) {
                *masses.last_mut().unwrap() += m;
            } else {
                support.push(x);
                masses.push(m);
            }
        }
        if support.is_empty() {
            return Err(Error::InvalidDistribution("no positive mass".into()));
        }
        let total: f64 = masses.iter().sum();
        if total != 1.0 {
            masses.iter_mut().for_each(|m| *m /= total);
        }
        Ok(Self::from_parts(support, masses))
    }

    fn from_parts(support: Vec<f64>, masses: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }
        *cumulative.last_mut().expect("nonempty") = 1.0;
        Self {
            support,
            masses,
            cumulative,
        }
    }

    /// Equal mass on every value (duplicates accumulate).
    pub fn uniform(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("no values".into()));
        }
        let m = 1.0 / values.len() as f64;
        Self::from_weighted(values.iter().map(|&x| (x, m)))
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::from_weighted([(x, 1.0)])
    }

    /// Finite mixture `Σ w_i · dist_i`; weights are normalised.
    pub fn mixture<'a, I>(components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a EmpiricalDistribution, f64)>,
    {
        let mut atoms = Vec::new();
        for (dist, w) in components {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidWeights(format!("mixture weight {w}")));
            }
            atoms.extend(dist.atoms().map(|(x, m)| (x, w * m)));
        }
        Self::from_weighted(atoms)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.masses.iter().copied())
    }

    pub fn min(&self) -> f64 {
        self.support[0]
    }

    pub fn max(&self) -> f64 {
        *self.support.last().expect("nonempty")
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(x, m)| x * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.atoms().map(|(x, m)| m * (x - mean) * (x - mean)).sum()
    }

    /// Cumulative masses; the last entry is exactly one.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Right-continuous CDF, `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.support.partition_point(|&s| s <= x) {
            0 => 0.0,
            i => self.cumulative[i - 1],
        }
    }

    /// Generalised inverse `inf { x : cdf(x) >= p }` for `p` in `(0, 1]`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Probability(p));
        }
        Ok(self.quantile_unchecked(p))
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        let i = self.cumulative.partition_point(|&c| c < p);
        self.support[i.min(self.support.len() - 1)]
    }

    /// The translate `B ↦ μ(B − z)`.
    pub fn translate(&self, z: f64) -> Self {
        Self::from_parts(
            self.support.iter().map(|x| x + z).collect(),
            self.masses.clone(),
        )
    }

    /// Re-bin onto centers `floor(x/w)·w + w/2`, accumulating mass.
    pub fn rebin(&self, bin_width: f64) -> Result<Self> {
        check_bin_width(bin_width)?;
        Self::from_weighted(
            self.atoms()
                .map(|(x, m)| (bin_center(bin_index(x, bin_width), bin_width), m)),
        )
    }
}

/// Bin `values` into width-`bin_width` bins with mass = relative frequency,
/// placing each bin's mass on its center.
pub fn empirical_distribution(values: &[f64], bin_width: f64) -> Result<EmpiricalDistribution> {
    check_bin_width(bin_width)?;
    if values.is_empty() {
        return Err(Error::InvalidDistribution("no values".into()));
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            value: bad,
            context: "binned value".into(),
        });
    }
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(bin_index(v, bin_width)).or_default() += 1;
    }
    let n = values.len() as f64;
    EmpiricalDistribution::from_weighted(
        counts
            .into_iter()
            .map(|(i, c)| (bin_center(i, bin_width), c as f64 / n)),
    )
}

/// Scores of one group binned for transport.
///
/// Each occupied bin is represented by the mean of the raw scores that fall
/// into it, so integer data with unit bins is represented exactly and the
/// distribution keeps the group's exact mean.
#[derive(Debug, Clone)]
pub struct BinnedScores {
    bin_width: f64,
    bins: Vec<i64>,
    counts: Vec<usize>,
    dist: EmpiricalDistribution,
}

impl BinnedScores {
    pub fn new(values: &[f64], bin_width: f64) -> Result<Self> {
        check_bin_width(bin_width)?;
        if values.is_empty() {
            return Err(Error::InvalidDistribution("no values".into()));
        }
        // bin -> (count, sum, min, max)
        let mut acc: BTreeMap<i64, (usize, f64, f64, f64)> = BTreeMap::new();
        for &v in values {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    value: v,
                    context: "binned value".into(),
                });
            }
            let e = acc
                .entry(bin_index(v, bin_width))
                .or_insert((0, 0.0, f64::INFINITY, f64::NEG_INFINITY));
            e.0 += 1;
            e.1 += v;
            e.2 = e.2.min(v);
            e.3 = e.3.max(v);
        }
        let n = values.len() as f64;
        let mut bins = Vec::with_capacity(acc.len());
        let mut counts = Vec::with_capacity(acc.len());
        let mut support = Vec::with_capacity(acc.len());
        let mut masses = Vec::with_capacity(acc.len());
        for (bin, (count, sum, lo, hi)) in acc {
            bins.push(bin);
            counts.push(count);
            support.push((sum / count as f64).clamp(lo, hi));
            masses.push(count as f64 / n);
        }
        let total: f64 = masses.iter().sum();
        if total != 1.0 {
            masses.iter_mut().for_each(|m| *m /= total);
        }
        Ok(Self {
            bin_width,
            bins,
            counts,
            dist: EmpiricalDistribution::from_parts(support, masses),
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Occupied bin indices, ascending; aligned with the distribution atoms.
    pub fn bins(&self) -> &[i64] {
        &self.bins
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn distribution(&self) -> &EmpiricalDistribution {
        &self.dist
    }

    /// Atom index holding `value`, if its bin is occupied.
    pub fn locate(&self, value: f64) -> Option<usize> {
        if !value.is_finite() {
            return None;
        }
        self.bins.binary_search(&bin_index(value, self.bin_width)).ok()
    }
}
