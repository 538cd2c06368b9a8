//! Utility and fairness evaluation of a repair.
//!
//! Scalar measures compare raw and fair scores group by group; ranking
//! measures compare the order induced by fair scores against the raw order
//! over a grid of selection cutoffs `k`.

use crate::distributions::{EmpiricalDistribution, GroupPartition};
use crate::error::{Error, Result};
use crate::transport::wasserstein2;

/// Disparity threshold of the US four-fifths rule.
pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// Records ordered best first: score descending, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl Ranking {
    pub fn from_scores(ids: &[String], scores: &[f64]) -> Result<Self> {
        if ids.len() != scores.len() {
            return Err(Error::IdMismatch(format!(
                "{} ids for {} scores",
                ids.len(),
                scores.len()
            )));
        }
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then_with(|| ids[a].cmp(&ids[b]))
        });
        let mut position = vec![0; order.len()];
        for (rank, &i) in order.iter().enumerate() {
            position[i] = rank;
        }
        Ok(Self { order, position })
    }

    /// Record indices, best first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Zero-based rank of record `i`.
    pub fn position(&self, i: usize) -> usize {
        self.position[i]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }

    pub fn ids<'a>(&'a self, ids: &'a [String]) -> impl Iterator<Item = &'a str> + 'a {
        self.order.iter().map(move |&i| ids[i].as_str())
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        Err(Error::RankCutoff { k, n })
    } else {
        Ok(())
    }
}

/// Selection cutoffs `step, 2·step, …` up to `n`; `[n]` when `n < step`.
pub fn k_grid(n: usize, step: usize) -> Vec<usize> {
    let step = step.max(1);
    let grid: Vec<usize> = (1..=n / step).map(|i| i * step).collect();
    if grid.is_empty() && n > 0 {
        vec![n]
    } else {
        grid
    }
}

/// 1,000 for populations of at least 50,000 records, otherwise 100.
pub fn default_k_step(n: usize) -> usize {
    if n >= 50_000 {
        1_000
    } else {
        100
    }
}

pub fn check_k_grid(ks: &[usize], n: usize) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::Config("empty k grid".into()));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("k grid must be strictly increasing".into()));
    }
    ks.iter().try_for_each(|&k| check_k(k, n))
}

fn check_scores(partition: &GroupPartition, raw: &[f64], fair: &[f64]) -> Result<()> {
    let n = partition.population();
    if raw.len() != n {
        return Err(Error::MissingScore(format!("{} raw scores for {n} records", raw.len())));
    }
    if fair.len() != n {
        return Err(Error::MissingScore(format!("{} fair scores for {n} records", fair.len())));
    }
    Ok(())
}

/// Per-group mean and population variance of the displacement `fair − raw`.
fn displacement_moments(partition: &GroupPartition, raw: &[f64], fair: &[f64]) -> Vec<(f64, f64, f64)> {
    (0..partition.num_groups())
        .map(|g| {
            let members = partition.members(g);
            let n = members.len() as f64;
            let mean = members.iter().map(|&i| fair[i] - raw[i]).sum::<f64>() / n;
            let mut var = 0.0;
            let mut square = 0.0;
            for &i in members {
                let d = fair[i] - raw[i];
                var += (d - mean) * (d - mean);
                square += d * d;
            }
            (mean, var / n, square / n)
        })
        .collect()
}

/// `E_ind = Σ_k w_k ∬ ½ |(T(x) − T(y)) − (x − y)|² dμ_k dμ_k`, computed as
/// the weighted within-group variance of the displacement.
pub fn individual_fairness_error(partition: &GroupPartition, raw: &[f64], fair: &[f64]) -> Result<f64> {
    check_scores(partition, raw, fair)?;
    Ok(displacement_moments(partition, raw, fair)
        .iter()
        .zip(partition.weights())
        .map(|((_, var, _), w)| w * var)
        .sum())
}

/// `U = −½ Σ_k w_k ∫ |T_k(x) − x|² dμ_k`.
pub fn decision_maker_utility(partition: &GroupPartition, raw: &[f64], fair: &[f64]) -> Result<f64> {
    check_scores(partition, raw, fair)?;
    let cost: f64 = displacement_moments(partition, raw, fair)
        .iter()
        .zip(partition.weights())
        .map(|((_, _, square), w)| w * square)
        .sum();
    // 0.0 rather than -0.0 for an untouched population
    Ok(0.0 - 0.5 * cost)
}

/// `Σ_k w_k (mean displacement of group k)²`.
pub fn mean_shift_term(partition: &GroupPartition, raw: &[f64], fair: &[f64]) -> Result<f64> {
    check_scores(partition, raw, fair)?;
    Ok(displacement_moments(partition, raw, fair)
        .iter()
        .zip(partition.weights())
        .map(|((mean, _, _), w)| w * mean * mean)
        .sum())
}

/// `max_k W2(ν_k, Σ_l w_l ν_l)`; zero exactly when all groups share one
/// fair score distribution.
pub fn parity_gap(fair_group_dists: &[EmpiricalDistribution], weights: &[f64]) -> Result<f64> {
    if fair_group_dists.len() != weights.len() || weights.is_empty() {
        return Err(Error::InvalidWeights(format!(
            "{} weights for {} distributions",
            weights.len(),
            fair_group_dists.len()
        )));
    }
    let aggregate = EmpiricalDistribution::mixture(fair_group_dists.iter().zip(weights.iter().copied()))?;
    Ok(fair_group_dists
        .iter()
        .map(|d| wasserstein2(d, &aggregate))
        .fold(0.0, f64::max))
}

/// Fraction of the fair top-`k` that is also in the raw top-`k`.
pub fn precision_at_k(raw: &Ranking, fair: &Ranking, k: usize) -> Result<f64> {
    Ok(precision_curve(raw, fair, &[k])?[0])
}

/// `precision_at_k` for every cutoff in `ks` in one pass.
pub fn precision_curve(raw: &Ranking, fair: &Ranking, ks: &[usize]) -> Result<Vec<f64>> {
    let n = raw.len();
    if fair.len() != n {
        return Err(Error::IdMismatch("rankings of different populations".into()));
    }
    ks.iter().try_for_each(|&k| check_k(k, n))?;
    // a record is in both top-k sets iff max(raw rank, fair rank) < k
    let mut first_shared = vec![0usize; n + 1];
    for i in 0..n {
        first_shared[raw.position(i).max(fair.position(i)) + 1] += 1;
    }
    for r in 1..=n {
        first_shared[r] += first_shared[r - 1];
    }
    Ok(ks.iter().map(|&k| first_shared[k] as f64 / k as f64).collect())
}

/// NDCG of the fair order with raw scores as gains and the raw order as the
/// ideal ranking.
pub fn ndcg_at_k(raw_scores: &[f64], fair: &Ranking, k: usize) -> Result<f64> {
    Ok(ndcg_curve(raw_scores, fair, &[k], None)?[0])
}

/// `ndcg_at_k` for every cutoff in `ks`. `ids` only labels errors.
pub fn ndcg_curve(raw_scores: &[f64], fair: &Ranking, ks: &[usize], ids: Option<&[String]>) -> Result<Vec<f64>> {
    let n = raw_scores.len();
    if fair.len() != n {
        return Err(Error::IdMismatch("ranking and scores differ in length".into()));
    }
    ks.iter().try_for_each(|&k| check_k(k, n))?;
    if let Some(i) = raw_scores.iter().position(|g| g.is_nan() || *g < 0.0) {
        return Err(Error::NegativeGain {
            id: ids.map_or_else(|| i.to_string(), |ids| ids[i].clone()),
            gain: raw_scores[i],
        });
    }
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let mut ideal: Vec<f64> = raw_scores.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));

    let discount = |rank: usize| 1.0 / ((rank + 2) as f64).log2();
    let mut dcg = vec![0.0; kmax + 1];
    let mut idcg = vec![0.0; kmax + 1];
    for r in 0..kmax {
        dcg[r + 1] = dcg[r] + raw_scores[fair.order()[r]] * discount(r);
        idcg[r + 1] = idcg[r] + ideal[r] * discount(r);
    }
    Ok(ks
        .iter()
        .map(|&k| {
            if idcg[k] > 0.0 {
                (dcg[k] / idcg[k]).min(1.0)
            } else {
                1.0
            }
        })
        .collect())
}

/// Ratio of a group's share of the selection to its population share.
pub fn disparity_ratio(selected_share: f64, group_share: f64) -> f64 {
    selected_share / group_share
}

/// `(members of group g in the top k / k) / w_g`.
pub fn disparity_measure(ranking: &Ranking, partition: &GroupPartition, group: usize, k: usize) -> Result<f64> {
    Ok(disparity_curves(ranking, partition, &[k])?[group][0])
}

/// Share of the top-`k` held by each group, for every `k` in `ks`.
/// Indexed `[group][k index]`.
pub fn selection_share_curves(ranking: &Ranking, partition: &GroupPartition, ks: &[usize]) -> Result<Vec<Vec<f64>>> {
    let n = ranking.len();
    if partition.population() != n {
        return Err(Error::IdMismatch("ranking and partition differ in size".into()));
    }
    ks.iter().try_for_each(|&k| check_k(k, n))?;
    let g = partition.num_groups();
    let mut counts = vec![0usize; g];
    let mut shares = vec![Vec::with_capacity(ks.len()); g];
    let mut taken = 0;
    for &k in ks {
        // ks need not be sorted for callers of the single-k helpers
        if k < taken {
            counts.iter_mut().for_each(|c| *c = 0);
            taken = 0;
        }
        for &i in &ranking.order()[taken..k] {
            counts[partition.group_of(i)] += 1;
        }
        taken = k;
        for (s, &c) in shares.iter_mut().zip(&counts) {
            s.push(c as f64 / k as f64);
        }
    }
    Ok(shares)
}

/// Disparity of every group at every `k`. Indexed `[group][k index]`.
pub fn disparity_curves(ranking: &Ranking, partition: &GroupPartition, ks: &[usize]) -> Result<Vec<Vec<f64>>> {
    let shares = selection_share_curves(ranking, partition, ks)?;
    Ok(shares
        .into_iter()
        .enumerate()
        .map(|(g, s)| {
            let w = partition.weight(g);
            s.into_iter().map(|x| disparity_ratio(x, w)).collect()
        })
        .collect())
}

/// Smallest grid cutoff from which the disparity stays at or above
/// `threshold` for every larger grid cutoff.
pub fn crossing_from_curve(ks: &[usize], disparity: &[f64], threshold: f64) -> Option<usize> {
    let mut crossing = None;
    for (&k, &d) in ks.iter().zip(disparity).rev() {
        if d >= threshold {
            crossing = Some(k);
        } else {
            break;
        }
    }
    crossing
}

pub fn crossing_rank(
    ranking: &Ranking,
    partition: &GroupPartition,
    group: usize,
    threshold: f64,
    ks: &[usize],
) -> Result<Option<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("threshold {threshold} outside (0, 1]")));
    }
    check_k_grid(ks, ranking.len())?;
    let curves = disparity_curves(ranking, partition, ks)?;
    Ok(crossing_from_curve(ks, &curves[group], threshold))
}

/// Per-group ranking outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupOutcome {
    pub label: String,
    pub weight: f64,
    pub count: usize,
    pub selected_share: Vec<f64>,
    pub disparity: Vec<f64>,
    pub crossing_rank: Option<usize>,
    /// Crossing rank of the same group under the raw ranking.
    pub raw_crossing_rank: Option<usize>,
}

/// Metric curves over a grid of cutoffs plus the scalar measures.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    pub k_grid: Vec<usize>,
    pub precision: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub groups: Vec<GroupOutcome>,
    pub individual_fairness_error: f64,
    pub utility: f64,
    pub parity_gap: f64,
    pub threshold: f64,
}

impl FairnessReport {
    pub fn min_precision(&self) -> f64 {
        self.precision.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_ndcg(&self) -> f64 {
        self.ndcg.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluate fair scores against raw scores.
pub fn evaluate(
    partition: &GroupPartition,
    ids: &[String],
    raw: &[f64],
    fair: &[f64],
    ks: &[usize],
    threshold: f64,
) -> Result<FairnessReport> {
    check_scores(partition, raw, fair)?;
    check_k_grid(ks, partition.population())?;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("threshold {threshold} outside (0, 1]")));
    }
    let raw_ranking = Ranking::from_scores(ids, raw)?;
    let fair_ranking = Ranking::from_scores(ids, fair)?;

    let precision = precision_curve(&raw_ranking, &fair_ranking, ks)?;
    let ndcg = ndcg_curve(raw, &fair_ranking, ks, Some(ids))?;
    let shares = selection_share_curves(&fair_ranking, partition, ks)?;
    let raw_disparity = disparity_curves(&raw_ranking, partition, ks)?;

    let groups = shares
        .into_iter()
        .zip(raw_disparity)
        .enumerate()
        .map(|(g, (selected_share, raw_disp))| {
            let weight = partition.weight(g);
            let disparity: Vec<f64> = selected_share.iter().map(|&s| disparity_ratio(s, weight)).collect();
            GroupOutcome {
                label: partition.describe(g),
                weight,
                count: partition.count(g),
                crossing_rank: crossing_from_curve(ks, &disparity, threshold),
                raw_crossing_rank: crossing_from_curve(ks, &raw_disp, threshold),
                selected_share,
                disparity,
            }
        })
        .collect();

    let fair_dists = (0..partition.num_groups())
        .map(|g| {
            let values: Vec<f64> = partition.members(g).iter().map(|&i| fair[i]).collect();
            EmpiricalDistribution::uniform(&values)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FairnessReport {
        k_grid: ks.to_vec(),
        precision,
        ndcg,
        groups,
        individual_fairness_error: individual_fairness_error(partition, raw, fair)?,
        utility: decision_maker_utility(partition, raw, fair)?,
        parity_gap: parity_gap(&fair_dists, partition.weights())?,
        threshold,
    })
}
