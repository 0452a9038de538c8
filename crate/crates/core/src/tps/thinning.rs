use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;

use crate::error::{invalid, Result};

/// Retained scenarios after thinning.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinnedSet {
    /// Indices into the original coordinate list, ascending.
    pub indices: Vec<usize>,
    pub coords: Vec<(f64, f64)>,
}

impl ThinnedSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Greedy thinning to `m` points: exact duplicates collapse onto their lowest
/// index, then the point with the smallest nearest-neighbour distance is
/// dropped repeatedly (the higher index on ties) until `m` remain.
pub fn thin_scenarios(coords: &[(f64, f64)], m: usize) -> Result<ThinnedSet> {
    if m == 0 {
        return invalid("at least one point must be retained");
    }
    if coords.iter().any(|c| !c.0.is_finite() || !c.1.is_finite()) {
        return invalid("non-finite coordinate");
    }
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| {
        coords[a]
            .0
            .total_cmp(&coords[b].0)
            .then(coords[a].1.total_cmp(&coords[b].1))
            .then(a.cmp(&b))
    });
    let mut alive = vec![false; coords.len()];
    let mut distinct = 0;
    for (k, &i) in order.iter().enumerate() {
        if k == 0 || coords[order[k - 1]] != coords[i] {
            alive[i] = true;
            distinct += 1;
        }
    }
    if m > distinct {
        return invalid(format!("cannot retain {m} of {distinct} distinct points"));
    }
    let mut tree: KdTree<f64, usize, [f64; 2]> = KdTree::with_capacity(2, distinct);
    for (i, c) in coords.iter().enumerate().filter(|(i, _)| alive[*i]) {
        tree.add([c.0, c.1], i)
            .map_err(|e| crate::Error::InvalidInput(format!("spatial index: {e:?}")))?;
    }
    let nearest = |tree: &KdTree<f64, usize, [f64; 2]>, i: usize| -> Option<(f64, usize)> {
        let p = [coords[i].0, coords[i].1];
        tree.nearest(&p, 2, &squared_euclidean)
            .ok()?
            .into_iter()
            .find(|(_, &j)| j != i)
            .map(|(d, &j)| (d, j))
    };
    let mut neighbour = vec![usize::MAX; coords.len()];
    // Max-heap on (−distance, index): smallest distance first, higher index on ties.
    let mut heap: BinaryHeap<(Reverse<Key>, usize)> = BinaryHeap::new();
    if distinct > 1 {
        for i in (0..coords.len()).filter(|&i| alive[i]) {
            let (d, j) = nearest(&tree, i).expect("at least two points");
            neighbour[i] = j;
            heap.push((Reverse(Key(d)), i));
        }
    }
    let mut remaining = distinct;
    while remaining > m {
        let (Reverse(Key(_)), i) = heap.pop().expect("heap holds every live point");
        if !alive[i] {
            continue;
        }
        if !alive[neighbour[i]] {
            // Stale: the neighbour is gone, so the true distance can only be larger.
            let (d, j) = nearest(&tree, i).expect("at least two points remain");
            neighbour[i] = j;
            heap.push((Reverse(Key(d)), i));
            continue;
        }
        alive[i] = false;
        tree.remove(&[coords[i].0, coords[i].1], &i)
            .map_err(|e| crate::Error::InvalidInput(format!("spatial index: {e:?}")))?;
        remaining -= 1;
    }
    let indices: Vec<usize> = (0..coords.len()).filter(|&i| alive[i]).collect();
    Ok(ThinnedSet {
        coords: indices.iter().map(|&i| coords[i]).collect(),
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Recomputes every pairwise distance at each step.
    fn brute_force(coords: &[(f64, f64)], m: usize) -> Vec<usize> {
        let mut alive: Vec<usize> = (0..coords.len()).collect();
        while alive.len() > m {
            let mut best = (f64::INFINITY, 0usize);
            for &i in &alive {
                let d = alive
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (coords[i].0 - coords[j].0).powi(2) + (coords[i].1 - coords[j].1).powi(2))
                    .fold(f64::INFINITY, f64::min);
                if d < best.0 || (d == best.0 && i > best.1) {
                    best = (d, i);
                }
            }
            alive.retain(|&i| i != best.1);
        }
        alive
    }

    #[test]
    fn identity_when_keeping_everything() {
        let c = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        assert_eq!(thin_scenarios(&c, 3).unwrap().indices, vec![0, 1, 2]);
    }

    #[test]
    fn single_survivor_is_lowest_index_among_ties() {
        let c = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)];
        assert_eq!(thin_scenarios(&c, 1).unwrap().indices, vec![0]);
    }

    #[test]
    fn tight_pair_loses_one_member() {
        let c = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.05, 0.0), (4.0, 0.0), (5.0, 0.0)];
        let t = thin_scenarios(&c, 5).unwrap();
        assert_eq!(t.indices, brute_force(&c, 5));
        assert_eq!(t.indices, vec![0, 1, 2, 4, 5]);
    }

    #[test]
    fn matches_brute_force_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [10, 60, 200] {
            let c: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
            for m in [1, n / 3, n - 1] {
                assert_eq!(thin_scenarios(&c, m).unwrap().indices, brute_force(&c, m), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn duplicates_collapse_before_thinning() {
        let c = [(1.0, 1.0), (0.0, 0.0), (1.0, 1.0), (3.0, 0.0)];
        assert_eq!(thin_scenarios(&c, 3).unwrap().indices, vec![0, 1, 3]);
        assert!(thin_scenarios(&c, 4).is_err());
    }
}
