//! k-medoids with k-means++ seeding and eager PAM swaps.
//!
//! The swap phase follows the FasterPAM scheme: for every non-medoid
//! candidate, the change in total deviation is evaluated against all
//! medoids at once using cached nearest/second-nearest assignments, and the
//! best improving swap for that candidate is applied immediately.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Upper bound on full passes over the candidates.
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PamResult {
    /// Indices into the input points.
    pub medoids: Vec<usize>,
    /// Position in `medoids` of each point's nearest medoid.
    pub assignment: Vec<usize>,
    pub cost: f64,
    /// Total deviation after initialisation and after every accepted swap.
    pub cost_history: Vec<f64>,
    pub swaps: usize,
    pub passes: usize,
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    medoid: usize,
    dist: f64,
}

#[derive(Debug, Clone, Copy)]
struct Rec {
    near: Pair,
    seco: Pair,
}

struct Pam<'a> {
    points: &'a [Vec<f64>],
    medoids: Vec<usize>,
    is_medoid: Vec<bool>,
    recs: Vec<Rec>,
    removal: Vec<f64>,
}

impl<'a> Pam<'a> {
    fn d(&self, i: usize, j: usize) -> f64 {
        euclidean(&self.points[i], &self.points[j])
    }

    fn assign(&mut self) -> f64 {
        let mut cost = 0.0;
        self.recs.clear();
        for o in 0..self.points.len() {
            let mut near = Pair {
                medoid: 0,
                dist: f64::INFINITY,
            };
            let mut seco = Pair {
                medoid: usize::MAX,
                dist: f64::INFINITY,
            };
            for (i, &med) in self.medoids.iter().enumerate() {
                let d = if o == med { 0.0 } else { self.d(o, med) };
                if d < near.dist || o == med {
                    seco = near;
                    near = Pair { medoid: i, dist: d };
                } else if d < seco.dist {
                    seco = Pair { medoid: i, dist: d };
                }
            }
            cost += near.dist;
            self.recs.push(Rec { near, seco });
        }
        cost
    }

    fn update_removal(&mut self) {
        self.removal.iter_mut().for_each(|v| *v = 0.0);
        for r in &self.recs {
            self.removal[r.near.medoid] += r.seco.dist - r.near.dist;
        }
    }

    /// Best medoid slot to exchange for candidate `j`, and the cost change.
    fn best_swap(&self, j: usize) -> (f64, usize) {
        let mut ploss = self.removal.clone();
        let mut acc = 0.0;
        for (o, r) in self.recs.iter().enumerate() {
            let doj = if o == j { 0.0 } else { self.d(o, j) };
            if doj < r.near.dist {
                acc += doj - r.near.dist;
                ploss[r.near.medoid] += r.near.dist - r.seco.dist;
            } else if doj < r.seco.dist {
                ploss[r.near.medoid] += doj - r.seco.dist;
            }
        }
        let (b, best) =
            ploss.iter().enumerate().fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
            );
        (best + acc, b)
    }

    fn second_nearest(&self, o: usize, near: usize, b: usize, dob: f64) -> Pair {
        let mut s = Pair {
            medoid: b,
            dist: dob,
        };
        for (i, &med) in self.medoids.iter().enumerate() {
            if i == near || i == b {
                continue;
            }
            let d = self.d(o, med);
            if d < s.dist {
                s = Pair { medoid: i, dist: d };
            }
        }
        s
    }

    /// Replaces medoid slot `b` by point `j` and returns the new total cost.
    fn swap(&mut self, b: usize, j: usize) -> f64 {
        self.is_medoid[self.medoids[b]] = false;
        self.medoids[b] = j;
        self.is_medoid[j] = true;
        let mut cost = 0.0;
        for o in 0..self.recs.len() {
            let mut r = self.recs[o];
            if o == j {
                if r.near.medoid != b {
                    r.seco = r.near;
                }
                r.near = Pair {
                    medoid: b,
                    dist: 0.0,
                };
            } else {
                let doj = self.d(o, j);
                if r.near.medoid == b {
                    if doj < r.seco.dist {
                        r.near = Pair {
                            medoid: b,
                            dist: doj,
                        };
                    } else {
                        r.near = r.seco;
                        r.seco = self.second_nearest(o, r.near.medoid, b, doj);
                    }
                } else if doj < r.near.dist {
                    r.seco = r.near;
                    r.near = Pair {
                        medoid: b,
                        dist: doj,
                    };
                } else if r.seco.medoid == b {
                    r.seco = self.second_nearest(o, r.near.medoid, b, doj);
                } else if doj < r.seco.dist {
                    r.seco = Pair {
                        medoid: b,
                        dist: doj,
                    };
                }
            }
            cost += r.near.dist;
            self.recs[o] = r;
        }
        cost
    }
}

/// k-means++ seeding: first medoid uniform, each further one drawn with
/// probability proportional to the squared distance to the closest chosen.
fn seed_medoids(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut taken = vec![false; n];
    taken[first] = true;
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| euclidean(p, &points[first]).powi(2))
        .collect();
    while chosen.len() < k {
        let total: f64 = (0..n).filter(|&i| !taken[i]).map(|i| d2[i]).sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut pick = None;
            for i in (0..n).filter(|&i| !taken[i] && d2[i] > 0.0) {
                pick = Some(i);
                if r < d2[i] {
                    break;
                }
                r -= d2[i];
            }
            pick.expect("positive mass implies a candidate")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        taken[pick] = true;
        chosen.push(pick);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(euclidean(p, &points[pick]).powi(2));
        }
    }
    chosen
}

pub fn pam(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<PamResult> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "k = {k} medoids for {n} points"
        )));
    }
    if k == 1 {
        let costs: Vec<f64> = (0..n)
            .map(|c| points.iter().map(|p| euclidean(p, &points[c])).sum())
            .collect();
        let (best, cost) =
            costs.iter().enumerate().fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
            );
        return Ok(PamResult {
            medoids: vec![best],
            assignment: vec![0; n],
            cost,
            cost_history: vec![cost],
            swaps: 0,
            passes: 0,
        });
    }

    let mut rng = rng::seeded(seed);
    let medoids = seed_medoids(points, k, &mut rng);
    let mut is_medoid = vec![false; n];
    medoids.iter().for_each(|&m| is_medoid[m] = true);
    let mut state = Pam {
        points,
        medoids,
        is_medoid,
        recs: Vec::with_capacity(n),
        removal: vec![0.0; k],
    };
    let mut cost = state.assign();
    state.update_removal();
    let mut history = vec![cost];
    let mut swaps = 0;
    let mut passes = 0;
    let mut last_swap = None;

    'outer: while passes < max_iter {
        passes += 1;
        let before = swaps;
        for j in 0..n {
            if last_swap == Some(j) {
                break 'outer;
            }
            if state.is_medoid[j] {
                continue;
            }
            let (change, b) = state.best_swap(j);
            if !(change < -1e-12 * cost.max(1.0)) {
                continue;
            }
            let new_cost = state.swap(b, j);
            state.update_removal();
            swaps += 1;
            last_swap = Some(j);
            cost = new_cost;
            history.push(cost);
        }
        if swaps == before {
            break;
        }
    }

    Ok(PamResult {
        assignment: state.recs.iter().map(|r| r.near.medoid).collect(),
        medoids: state.medoids,
        cost,
        cost_history: history,
        swaps,
        passes,
    })
}

/// Validation-set medoids and, for each, its nearest other medoids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedoidIndex {
    /// Row ids of the medoids, in the caller's numbering.
    pub medoid_rows: Vec<usize>,
    pub medoids: Vec<Vec<f64>>,
    /// Medoid slot of each clustered row.
    pub assignments: Vec<usize>,
    /// For each medoid, the slots of its `k_nn` nearest other medoids.
    pub neighbours: Vec<Vec<usize>>,
    pub k_nn: usize,
    pub cost: f64,
}

/// Average cluster size the index aims for.
pub const CLUSTER_SIZE: usize = 10;

/// Builds the index with `round(n / 10)` medoids (at least 2).
pub fn build_medoid_index(validation: &[Vec<f64>], k_nn: usize, seed: u64) -> Result<MedoidIndex> {
    let n = validation.len();
    if n < 2 * CLUSTER_SIZE {
        return Err(Error::TooFewRows {
            needed: 2 * CLUSTER_SIZE,
            found: n,
        });
    }
    let k = ((n as f64 / CLUSTER_SIZE as f64).round() as usize).max(2);
    build_medoid_index_with_k(validation, k, k_nn, seed)
}

pub fn build_medoid_index_with_k(
    validation: &[Vec<f64>],
    k_medoids: usize,
    k_nn: usize,
    seed: u64,
) -> Result<MedoidIndex> {
    if k_nn == 0 {
        return Err(Error::InvalidConfig("k_nn must be at least 1".into()));
    }
    let res = pam(validation, k_medoids, seed, DEFAULT_MAX_ITER)?;
    let medoids: Vec<Vec<f64>> = res.medoids.iter().map(|&r| validation[r].clone()).collect();
    let neighbours = neighbour_lists(&medoids, k_nn);
    Ok(MedoidIndex {
        medoid_rows: res.medoids,
        medoids,
        assignments: res.assignment,
        neighbours,
        k_nn,
        cost: res.cost,
    })
}

fn neighbour_lists(medoids: &[Vec<f64>], k_nn: usize) -> Vec<Vec<usize>> {
    medoids
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut others: Vec<(f64, usize)> = medoids
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, o)| (euclidean(m, o), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k_nn).map(|(_, j)| j).collect()
        })
        .collect()
}

impl MedoidIndex {
    pub fn len(&self) -> usize {
        self.medoids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.medoids.is_empty()
    }

    /// Slot of the closest medoid; ties go to the lowest slot.
    pub fn nearest_medoid(&self, x: &[f64]) -> usize {
        self.medoids
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, m)| {
                let d = euclidean(x, m);
                if d < acc.1 {
                    (i, d)
                } else {
                    acc
                }
            })
            .0
    }

    /// Draws a mixing medoid uniformly from the neighbour list of the
    /// medoid nearest to `x`. Returns the slot.
    pub fn pick_mixing_medoid(&self, x: &[f64], rng: &mut impl Rng) -> Result<usize> {
        let home = self.nearest_medoid(x);
        let list = &self.neighbours[home];
        if list.is_empty() {
            return Err(Error::EmptyNeighbourList(home));
        }
        Ok(list[rng.random_range(0..list.len())])
    }

    /// Rewrites `medoid_rows` through `ids` (e.g. validation position → dataset row).
    pub fn remap_rows(&mut self, ids: &[usize]) {
        for r in &mut self.medoid_rows {
            *r = ids[*r];
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.medoids.len();
        crate::error::check_len(k, self.neighbours.len())?;
        crate::error::check_len(k, self.medoid_rows.len())?;
        let expected = self.k_nn.min(k.saturating_sub(1));
        for (i, list) in self.neighbours.iter().enumerate() {
            if list.len() != expected || list.iter().any(|&j| j == i || j >= k) {
                return Err(Error::InvalidConfig(format!(
                    "bad neighbour list for medoid {i}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64, per: usize) -> Vec<Vec<f64>> {
        let mut r = rng::seeded(seed);
        let mut pts = Vec::new();
        for c in [-10.0, 10.0] {
            for _ in 0..per {
                pts.push(vec![
                    c + r.random_range(-1.0..1.0),
                    r.random_range(-1.0..1.0),
                ]);
            }
        }
        pts
    }

    fn total_cost(points: &[Vec<f64>], medoids: &[usize]) -> f64 {
        points
            .iter()
            .map(|p| {
                medoids
                    .iter()
                    .map(|&m| euclidean(p, &points[m]))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    #[test]
    fn separated_blobs_get_one_medoid_each() {
        let pts = blobs(1, 15);
        let res = pam(&pts, 2, 3, DEFAULT_MAX_ITER).unwrap();
        let sides: Vec<bool> = res.medoids.iter().map(|&m| pts[m][0] > 0.0).collect();
        assert_ne!(sides[0], sides[1]);
        for (p, &a) in pts.iter().zip(&res.assignment) {
            assert_eq!(p[0] > 0.0, sides[a]);
        }
        // Brute force over all pairs.
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.min(total_cost(&pts, &[i, j]));
            }
        }
        assert!(res.cost <= best * 1.05);
        assert!((res.cost - total_cost(&pts, &res.medoids)).abs() < 1e-9);
    }

    #[test]
    fn every_point_its_own_medoid() {
        let pts = blobs(2, 5);
        let res = pam(&pts, pts.len(), 0, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(res.cost, 0.0);
        let mut m = res.medoids.clone();
        m.sort_unstable();
        assert_eq!(m, (0..pts.len()).collect::<Vec<_>>());
    }

    #[test]
    fn cost_never_increases() {
        let mut r = rng::seeded(5);
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..4).map(|_| r.random_range(-3.0..3.0)).collect())
            .collect();
        let res = pam(&pts, 25, 9, DEFAULT_MAX_ITER).unwrap();
        assert!(res.swaps > 0);
        assert!(res.cost_history.windows(2).all(|w| w[1] < w[0]));
        assert!((res.cost - total_cost(&pts, &res.medoids)).abs() < 1e-8);
    }

    #[test]
    fn deterministic() {
        let pts = blobs(4, 30);
        let a = build_medoid_index(&pts, 5, 1).unwrap();
        let b = build_medoid_index(&pts, 5, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        a.validate().unwrap();
    }

    #[test]
    fn too_few_rows() {
        let pts = blobs(4, 5);
        assert!(matches!(
            build_medoid_index(&pts, 5, 1),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn neighbour_lists_exclude_self() {
        let pts = blobs(6, 50);
        let idx = build_medoid_index(&pts, 5, 2).unwrap();
        for (i, list) in idx.neighbours.iter().enumerate() {
            assert_eq!(list.len(), 5);
            assert!(!list.contains(&i));
        }
        // A point equal to medoid 0 uses medoid 0's list.
        let mut r = rng::seeded(0);
        let x = idx.medoids[0].clone();
        for _ in 0..50 {
            let pick = idx.pick_mixing_medoid(&x, &mut r).unwrap();
            assert!(idx.neighbours[0].contains(&pick));
        }
    }

    #[test]
    fn two_medoids_force_the_other() {
        let pts = blobs(7, 10);
        let idx = build_medoid_index_with_k(&pts, 2, 5, 0).unwrap();
        assert_eq!(idx.neighbours, vec![vec![1], vec![0]]);
        let mut r = rng::seeded(1);
        let home = idx.nearest_medoid(&pts[0]);
        for _ in 0..20 {
            assert_eq!(idx.pick_mixing_medoid(&pts[0], &mut r).unwrap(), 1 - home);
        }
    }

    #[test]
    fn single_medoid_has_no_neighbours() {
        let pts = blobs(8, 10);
        let idx = build_medoid_index_with_k(&pts, 1, 5, 0).unwrap();
        let mut r = rng::seeded(1);
        assert!(matches!(
            idx.pick_mixing_medoid(&pts[0], &mut r),
            Err(Error::EmptyNeighbourList(0))
        ));
    }
}
