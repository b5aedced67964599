use std::collections::HashMap;

use itertools::Itertools;

/// Every sorted pair database over `0..domain × 0..alphabet` with at most
/// `capacity` pairs, numbered by size and then lexicographically. The empty
/// database is number 0.
#[derive(Clone, Debug)]
pub struct DbTable {
    entries: Vec<Vec<(usize, usize)>>,
    index: HashMap<Vec<(usize, usize)>, usize>,
}

impl DbTable {
    pub fn new(domain: usize, alphabet: usize, capacity: usize) -> Self {
        let mut entries = vec![vec![]];
        for k in 1..=capacity.min(domain) {
            for xs in (0..domain).combinations(k) {
                for ys in (0..k).map(|_| 0..alphabet).multi_cartesian_product() {
                    entries.push(xs.iter().copied().zip(ys).collect());
                }
            }
        }
        let index = entries.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        DbTable { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn empty(&self) -> usize {
        0
    }

    pub fn pairs(&self, db: usize) -> &[(usize, usize)] {
        &self.entries[db]
    }

    pub fn size(&self, db: usize) -> usize {
        self.entries[db].len()
    }

    pub fn index_of(&self, pairs: &[(usize, usize)]) -> Option<usize> {
        self.index.get(pairs).copied()
    }

    /// `D(x)`, or `None` for `⊥`.
    pub fn get(&self, db: usize, x: usize) -> Option<usize> {
        self.entries[db].iter().find(|p| p.0 == x).map(|p| p.1)
    }

    /// `D ∪ (x, y)` when `D(x) = ⊥` and there is room.
    pub fn insert(&self, db: usize, x: usize, y: usize) -> Option<usize> {
        let e = &self.entries[db];
        if e.iter().any(|p| p.0 == x) {
            return None;
        }
        let at = e.partition_point(|p| p.0 < x);
        let mut v = e.clone();
        v.insert(at, (x, y));
        self.index_of(&v)
    }

    /// `(D′, y)` with `D = D′ ∪ (x, y)`.
    pub fn remove(&self, db: usize, x: usize) -> Option<(usize, usize)> {
        let e = &self.entries[db];
        let at = e.iter().position(|p| p.0 == x)?;
        let mut v = e.clone();
        let (_, y) = v.remove(at);
        Some((self.index_of(&v).expect("subsets are enumerated"), y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_round_trips() {
        let t = DbTable::new(3, 2, 2);
        assert_eq!(t.len(), 1 + 3 * 2 + 3 * 4);
        let a = t.insert(t.empty(), 2, 1).unwrap();
        let b = t.insert(a, 0, 0).unwrap();
        assert_eq!(t.pairs(b), &[(0, 0), (2, 1)]);
        assert_eq!(t.insert(b, 1, 0), None);
        assert_eq!(t.insert(b, 2, 0), None);
        assert_eq!(t.remove(b, 2), Some((t.index_of(&[(0, 0)]).unwrap(), 1)));
        assert_eq!(t.get(b, 1), None);
        assert_eq!(t.get(b, 0), Some(0));
    }
}
