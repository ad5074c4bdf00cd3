//! Filter index for the filtered ranking protocol.

use std::collections::HashMap;

use super::Quadruple;

/// Maps (head, relation, time) to the set of known-true tails over the
/// union of all splits (reciprocal-augmented, so head-direction queries are
/// covered through inverse relation ids). Duplicated facts collapse.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    map: HashMap<(u32, u32, u32), Vec<u32>>,
}

/// Build the index from augmented facts of every split.
pub fn build_filter_index(augmented_facts: &[Quadruple]) -> FilterIndex {
    let mut map: HashMap<(u32, u32, u32), Vec<u32>> = HashMap::new();
    for f in augmented_facts {
        map.entry((f.head, f.rel, f.time)).or_default().push(f.tail);
    }
    for tails in map.values_mut() {
        tails.sort_unstable();
        tails.dedup();
    }
    FilterIndex { map }
}

impl FilterIndex {
    /// Known-true tails for a query key, sorted ascending.
    pub fn golds(&self, head: u32, rel: u32, time: u32) -> &[u32] {
        self.map
            .get(&(head, rel, time))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, q: &Quadruple) -> bool {
        self.golds(q.head, q.rel, q.time).binary_search(&q.tail).is_ok()
    }

    /// Number of distinct (head, relation, time) keys.
    pub fn n_keys(&self) -> usize {
        self.map.len()
    }

    /// Sum of gold-set sizes over all keys (= number of distinct augmented
    /// facts).
    pub fn total_golds(&self) -> usize {
        self.map.values().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fact_single_gold() {
        let idx = build_filter_index(&[Quadruple::new(1, 2, 3, 4)]);
        assert_eq!(idx.golds(1, 2, 4), &[3]);
        assert_eq!(idx.n_keys(), 1);
        assert_eq!(idx.total_golds(), 1);
    }

    #[test]
    fn same_key_collects_both_tails() {
        let idx = build_filter_index(&[
            Quadruple::new(1, 2, 3, 4),
            Quadruple::new(1, 2, 7, 4),
        ]);
        assert_eq!(idx.n_keys(), 1);
        assert_eq!(idx.golds(1, 2, 4), &[3, 7]);
    }

    #[test]
    fn duplicates_are_idempotent() {
        let f = Quadruple::new(0, 0, 1, 0);
        let idx = build_filter_index(&[f, f, f]);
        assert_eq!(idx.total_golds(), 1);
        assert!(idx.contains(&f));
    }

    #[test]
    fn every_fact_is_in_its_own_filter_set() {
        let facts = vec![
            Quadruple::new(0, 0, 1, 0),
            Quadruple::new(1, 1, 0, 2),
            Quadruple::new(2, 0, 2, 1),
        ];
        let idx = build_filter_index(&facts);
        for f in &facts {
            assert!(idx.contains(f));
        }
    }
}
