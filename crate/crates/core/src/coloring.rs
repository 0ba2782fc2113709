//! Greedy class assignment for bounded-degree relations.

use crate::error::{Error, Result};

/// Sort `items` into `max_degree + 1` classes so that no two distinct
/// related items share a class.
///
/// `related` must be reflexive and symmetric, and every item may relate to
/// at most `max_degree` others; a degree overflow is reported with the
/// offending item.  Items are processed in their given order, which makes
/// the assignment deterministic.  All `max_degree + 1` classes are returned
/// even when some stay empty.
pub fn greedy_color<T: Clone + std::fmt::Debug>(
    items: &[T],
    related: impl Fn(&T, &T) -> bool,
    max_degree: usize,
) -> Result<Vec<Vec<T>>> {
    let n = items.len();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if related(&items[i], &items[j]) {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    for (i, adjacent) in neighbors.iter().enumerate() {
        if adjacent.len() > max_degree {
            return Err(Error::DegreeExceeded {
                item: format!("{:?}", items[i]),
                degree: adjacent.len(),
                max_degree,
            });
        }
    }

    let mut color = vec![usize::MAX; n];
    for i in 0..n {
        let mut used = vec![false; max_degree + 1];
        for &j in &neighbors[i] {
            if color[j] != usize::MAX {
                used[color[j]] = true;
            }
        }
        color[i] = used
            .iter()
            .position(|taken| !taken)
            .expect("degree bound guarantees a free class");
    }

    let mut classes = vec![Vec::new(); max_degree + 1];
    for (i, item) in items.iter().enumerate() {
        classes[color[i]].push(item.clone());
    }
    Ok(classes)
}

/// Exact validity check for a class assignment: no intra-class related pair.
pub fn coloring_is_valid<T>(classes: &[Vec<T>], related: impl Fn(&T, &T) -> bool) -> bool {
    classes.iter().all(|class| {
        class
            .iter()
            .enumerate()
            .all(|(i, a)| class[i + 1..].iter().all(|b| !related(a, b)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_three_classes() {
        let items: Vec<u32> = (0..5).collect();
        let related = |a: &u32, b: &u32| a.abs_diff(*b) <= 1;
        let classes = greedy_color(&items, related, 2).unwrap();
        assert_eq!(classes.len(), 3);
        assert!(coloring_is_valid(&classes, related));
        let assigned: usize = classes.iter().map(|c| c.len()).sum();
        assert_eq!(assigned, 5);
    }

    #[test]
    fn empty_relation_single_class() {
        let items: Vec<u32> = (0..6).collect();
        let classes = greedy_color(&items, |a, b| a == b, 0).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].len(), 6);
    }

    #[test]
    fn complete_graph_forces_singletons() {
        let items: Vec<u32> = (0..4).collect();
        let classes = greedy_color(&items, |_, _| true, 3).unwrap();
        assert_eq!(classes.len(), 4);
        assert!(classes.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn degree_overflow_reported() {
        let items: Vec<u32> = (0..5).collect();
        let err = greedy_color(&items, |_, _| true, 2).unwrap_err();
        assert!(matches!(err, Error::DegreeExceeded { .. }));
    }
}
