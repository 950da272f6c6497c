//! Rank correlation and the two reliability scores.
//!
//! Local robustness is the mean Spearman correlation between the anchor's
//! attribution and each neighbour's. Consistency is the correlation between
//! the anchor's attribution and the inverse-distance weighted mean of the
//! neighbours' attributions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attribution::{ensemble, explain, Attribution, EnsembleWeighting, ExplainSpec, Method};
use crate::error::{check_len, Error, Result};
use crate::neighbourhood::Neighbourhood;
use crate::net::MlpModel;

/// Distances below this are clamped before inversion.
pub const MIN_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    /// One of the inputs was constant; `rho` is 0 by convention.
    pub degenerate: bool,
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of two rank vectors, whose mean is always (n + 1) / 2.
/// Equal rank vectors give exactly 1 since `sqrt(s * s) == s`.
fn rank_pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (ma, mb) = (mean, mean);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<Spearman> {
    check_len(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "rank correlation needs 2 or more values, got {}",
            a.len()
        )));
    }
    crate::error::check_finite(a, "rank correlation input")?;
    crate::error::check_finite(b, "rank correlation input")?;
    Ok(match rank_pearson(&average_ranks(a), &average_ranks(b)) {
        Some(rho) => Spearman {
            rho,
            degenerate: false,
        },
        None => Spearman {
            rho: 0.0,
            degenerate: true,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAttribution {
    pub values: Vec<f64>,
    pub weights_used: Vec<f64>,
    /// Some distance was clamped to [`MIN_DISTANCE`].
    pub degenerate: bool,
}

/// `ē = Σ π_i e_i / Σ π_i` with `π_i = 1 / max(dist_i, 1e-12)`, over the
/// neighbours only.
pub fn weighted_attribution(
    anchor: &Attribution,
    members: &[Attribution],
    distances: &[f64],
) -> Result<WeightedAttribution> {
    if members.is_empty() {
        return Err(Error::EmptyNeighbourhood);
    }
    check_len(members.len(), distances.len())?;
    let m = anchor.len();
    let mut degenerate = false;
    let mut weights = Vec::with_capacity(members.len());
    for &d in distances {
        if d.is_nan() || d < 0.0 {
            return Err(Error::NegativeDistance(d));
        }
        if d < MIN_DISTANCE {
            degenerate = true;
        }
        weights.push(1.0 / d.max(MIN_DISTANCE));
    }
    let total: f64 = weights.iter().sum();
    let shares: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut values = vec![0.0; m];
    for (a, w) in members.iter().zip(&shares) {
        check_len(m, a.len())?;
        for (acc, v) in values.iter_mut().zip(&a.values) {
            *acc += w * v;
        }
    }
    crate::error::check_finite(&values, "weighted attribution")?;
    Ok(WeightedAttribution {
        values,
        weights_used: weights,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Robustness {
    pub value: f64,
    /// Member correlations that were degenerate and counted as 0.
    pub degenerate: usize,
}

pub fn local_robustness(anchor: &Attribution, members: &[Attribution]) -> Result<Robustness> {
    if members.is_empty() {
        return Err(Error::EmptyNeighbourhood);
    }
    let mut sum = 0.0;
    let mut degenerate = 0;
    for a in members {
        let s = spearman_rho(&anchor.values, &a.values)?;
        sum += s.rho;
        degenerate += s.degenerate as usize;
    }
    Ok(Robustness {
        value: sum / members.len() as f64,
        degenerate,
    })
}

pub fn consistency(anchor: &Attribution, weighted: &WeightedAttribution) -> Result<Spearman> {
    spearman_rho(&anchor.values, &weighted.values)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreFlags {
    pub degenerate_robustness: usize,
    pub degenerate_consistency: bool,
    pub clamped_distances: bool,
    pub vanishing_anchor: bool,
    pub vanishing_members: usize,
}

impl ScoreFlags {
    pub fn is_clean(&self) -> bool {
        *self == Self::default()
    }
}

/// `;`-separated markers, empty when clean.
impl fmt::Display for ScoreFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.degenerate_robustness > 0 {
            parts.push(format!(
                "robustness_degenerate={}",
                self.degenerate_robustness
            ));
        }
        if self.degenerate_consistency {
            parts.push("consistency_degenerate".into());
        }
        if self.clamped_distances {
            parts.push("distance_clamped".into());
        }
        if self.vanishing_anchor {
            parts.push("anchor_zero".into());
        }
        if self.vanishing_members > 0 {
            parts.push(format!("members_zero={}", self.vanishing_members));
        }
        f.write_str(&parts.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityScore {
    pub point_id: usize,
    pub method: Method,
    pub robustness: f64,
    pub consistency: f64,
    pub n_members: usize,
    pub flags: ScoreFlags,
}

pub fn score_from_attributions(
    point_id: usize,
    anchor: &Attribution,
    members: &[Attribution],
    distances: &[f64],
) -> Result<ReliabilityScore> {
    let rob = local_robustness(anchor, members)?;
    let weighted = weighted_attribution(anchor, members, distances)?;
    let cons = consistency(anchor, &weighted)?;
    Ok(ReliabilityScore {
        point_id,
        method: anchor.method,
        robustness: rob.value,
        consistency: cons.rho,
        n_members: members.len(),
        flags: ScoreFlags {
            degenerate_robustness: rob.degenerate,
            degenerate_consistency: cons.degenerate,
            clamped_distances: weighted.degenerate,
            vanishing_anchor: anchor.flags.vanishing,
            vanishing_members: members.iter().filter(|a| a.flags.vanishing).count(),
        },
    })
}

/// Weights proportional to each member method's robustness, negatives
/// counted as 0; uniform when none is positive.
pub fn robustness_weights(robustness: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = robustness.iter().map(|r| r.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total > 0.0 {
        clipped.iter().map(|r| r / total).collect()
    } else {
        vec![1.0 / robustness.len() as f64; robustness.len()]
    }
}

/// Explains the anchor and every neighbour with `spec` and scores the point.
pub fn score_point(
    model: &MlpModel,
    point_id: usize,
    x: &[f64],
    spec: &ExplainSpec,
    neighbourhood: &Neighbourhood,
) -> Result<ReliabilityScore> {
    check_len(neighbourhood.anchor.len(), x.len())?;
    if neighbourhood.anchor.as_slice() != x {
        return Err(Error::InvalidConfig(
            "neighbourhood is anchored at a different point".into(),
        ));
    }
    if neighbourhood.is_empty() {
        return Err(Error::EmptyNeighbourhood);
    }
    let distances = neighbourhood.distances();
    if let ExplainSpec::Ensemble(p) = spec {
        if p.weighting == EnsembleWeighting::Robustness {
            return score_robustness_weighted(
                model,
                point_id,
                x,
                &p.members,
                neighbourhood,
                &distances,
            );
        }
    }
    let anchor = explain(model, x, spec)?;
    let members = neighbourhood
        .members
        .iter()
        .map(|m| explain(model, &m.point, spec))
        .collect::<Result<Vec<_>>>()?;
    score_from_attributions(point_id, &anchor, &members, &distances)
}

fn score_robustness_weighted(
    model: &MlpModel,
    point_id: usize,
    x: &[f64],
    specs: &[ExplainSpec],
    neighbourhood: &Neighbourhood,
    distances: &[f64],
) -> Result<ReliabilityScore> {
    if specs.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut anchors = Vec::with_capacity(specs.len());
    let mut per_member: Vec<Vec<Attribution>> = Vec::with_capacity(specs.len());
    let mut rob = Vec::with_capacity(specs.len());
    for s in specs {
        if s.method() == Method::Ensemble {
            return Err(Error::InvalidConfig("ensembles cannot be nested".into()));
        }
        let a = explain(model, x, s)?;
        let ms = neighbourhood
            .members
            .iter()
            .map(|m| explain(model, &m.point, s))
            .collect::<Result<Vec<_>>>()?;
        rob.push(local_robustness(&a, &ms)?.value);
        anchors.push(a);
        per_member.push(ms);
    }
    let weighting = EnsembleWeighting::Custom(robustness_weights(&rob));
    let anchor = ensemble(&anchors, &weighting)?;
    let members = (0..neighbourhood.len())
        .map(|k| {
            let atts: Vec<Attribution> = per_member.iter().map(|ms| ms[k].clone()).collect();
            ensemble(&atts, &weighting)
        })
        .collect::<Result<Vec<_>>>()?;
    score_from_attributions(point_id, &anchor, &members, distances)
}
