//! Covers of Cayley graphs by families of separated bricks.
//!
//! The lattice `Z^d` is covered by `d+1` families of axis-aligned cubes laid
//! out on a period-`(d+1)z` grid, each family diagonally shifted by `z`.
//! Within one family consecutive cubes are `z` apart on every axis, so the
//! `r`-chain components of a family are single cubes whenever `z > r`.

use crate::error::{Error, Result};
use crate::group::Element;

/// Membership test for a cover of a Cayley graph by labelled families.
pub trait GeometricCover {
    /// Number of families (dimension index plus one).
    fn family_count(&self) -> usize;
    /// Chain scale the cover is certified for.
    fn scale(&self) -> u64;
    /// Certified diameter bound for the `scale()`-components of a family.
    fn diameter_bound(&self) -> u64;
    /// Whether family `i` contains the group element.
    fn contains(&self, family: usize, elt: &Element) -> bool;
}

/// Brick cover of the Cayley graph of `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZdBrickCover {
    dim: u32,
    scale: u64,
    /// Gap between consecutive bricks of one family, also the per-family
    /// diagonal shift.
    zone: u64,
}

impl ZdBrickCover {
    /// Brick cover certified at chain scale `r`: every `r`-component of a
    /// family is one brick of side `d * zone`.
    pub fn new(dim: u32, r: u64) -> Result<ZdBrickCover> {
        if dim < 1 || r < 1 {
            return Err(Error::precondition("brick cover needs d >= 1 and r >= 1"));
        }
        let zone = (4 * r).div_ceil(dim as u64).max(r + 1);
        Ok(ZdBrickCover { dim, scale: r, zone })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Side length of a brick.
    pub fn side(&self) -> u64 {
        self.dim as u64 * self.zone
    }

    pub fn zone(&self) -> u64 {
        self.zone
    }

    fn zone_index(&self, coord: i64) -> u64 {
        let period = (self.dim as i64 + 1) * self.zone as i64;
        (coord.rem_euclid(period) as u64) / self.zone
    }

    pub fn contains_point(&self, family: usize, point: &[i64]) -> bool {
        debug_assert_eq!(point.len(), self.dim as usize);
        let excluded = (family as u64 + self.dim as u64) % (self.dim as u64 + 1);
        point.iter().all(|&c| self.zone_index(c) != excluded)
    }

    /// Identifier of the brick of `family` containing `point`.
    pub fn brick_id(&self, family: usize, point: &[i64]) -> Vec<i64> {
        let period = (self.dim as i64 + 1) * self.zone as i64;
        let shift = family as i64 * self.zone as i64;
        point.iter().map(|&c| (c - shift).div_euclid(period)).collect()
    }

    /// Exhaustive component scan of every family over a finite window.
    ///
    /// Components are formed by chains of steps of word length at most the
    /// cover scale; the certificate records the worst diameter seen, which
    /// must not exceed `diameter_bound`.
    pub fn verify_window(&self, lo: i64, hi: i64) -> WindowCertificate {
        let dim = self.dim as usize;
        let mut points: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..dim {
            let mut next = Vec::new();
            for p in &points {
                for c in lo..=hi {
                    let mut q = p.clone();
                    q.push(c);
                    next.push(q);
                }
            }
            points = next;
        }
        // all steps of word length <= scale, identity excluded
        let mut offsets: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..dim {
            let mut next = Vec::new();
            for p in &offsets {
                let used: u64 = p.iter().map(|c| c.unsigned_abs()).sum();
                let budget = self.scale - used;
                for c in -(budget as i64)..=budget as i64 {
                    let mut q = p.clone();
                    q.push(c);
                    next.push(q);
                }
            }
            offsets = next;
        }
        offsets.retain(|o| o.iter().any(|&c| c != 0));

        let mut max_diameter = vec![0u64; dim + 1];
        for family in 0..family_count_of(dim) {
            let members: Vec<&Vec<i64>> = points
                .iter()
                .filter(|p| self.contains_point(family, p))
                .collect();
            let index: std::collections::HashMap<&[i64], usize> = members
                .iter()
                .enumerate()
                .map(|(i, p)| (p.as_slice(), i))
                .collect();
            let mut seen = vec![false; members.len()];
            for start in 0..members.len() {
                if seen[start] {
                    continue;
                }
                let mut component = vec![start];
                seen[start] = true;
                let mut frontier = vec![start];
                while let Some(cur) = frontier.pop() {
                    for offset in &offsets {
                        let neighbor: Vec<i64> = members[cur]
                            .iter()
                            .zip(offset)
                            .map(|(a, b)| a + b)
                            .collect();
                        if let Some(&other) = index.get(neighbor.as_slice()) {
                            if !seen[other] {
                                seen[other] = true;
                                component.push(other);
                                frontier.push(other);
                            }
                        }
                    }
                }
                let mut diameter = 0u64;
                for (i, &a) in component.iter().enumerate() {
                    for &b in &component[i + 1..] {
                        let dist: u64 = members[a]
                            .iter()
                            .zip(members[b].iter())
                            .map(|(x, y)| x.abs_diff(*y))
                            .sum();
                        diameter = diameter.max(dist);
                    }
                }
                max_diameter[family] = max_diameter[family].max(diameter);
            }
        }
        WindowCertificate {
            bound: self.diameter_bound(),
            max_diameter_per_family: max_diameter,
        }
    }
}

fn family_count_of(dim: usize) -> usize {
    dim + 1
}

impl GeometricCover for ZdBrickCover {
    fn family_count(&self) -> usize {
        self.dim as usize + 1
    }

    fn scale(&self) -> u64 {
        self.scale
    }

    fn diameter_bound(&self) -> u64 {
        self.dim as u64 * self.side()
    }

    fn contains(&self, family: usize, elt: &Element) -> bool {
        match elt {
            Element::Vector(v) => self.contains_point(family, v),
            _ => panic!("brick cover applies to free-abelian elements"),
        }
    }
}

/// Trivial one-family cover of a whole Cayley graph; components are only
/// bounded when the graph itself is small.
#[derive(Debug, Clone)]
pub struct WholeGraphCover {
    pub scale: u64,
    pub diameter_bound: u64,
}

impl GeometricCover for WholeGraphCover {
    fn family_count(&self) -> usize {
        1
    }

    fn scale(&self) -> u64 {
        self.scale
    }

    fn diameter_bound(&self) -> u64 {
        self.diameter_bound
    }

    fn contains(&self, _family: usize, _elt: &Element) -> bool {
        true
    }
}

/// Result of a window scan of a geometric cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowCertificate {
    pub bound: u64,
    pub max_diameter_per_family: Vec<u64>,
}

impl WindowCertificate {
    pub fn holds(&self) -> bool {
        self.max_diameter_per_family.iter().all(|&d| d <= self.bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_layout() {
        let cover = ZdBrickCover::new(1, 1).unwrap();
        assert_eq!(cover.family_count(), 2);
        assert_eq!(cover.side(), 4);
        assert_eq!(cover.diameter_bound(), 4);
        // family 0 holds [0,4), family 1 holds [4,8), period 8
        for x in 0..4 {
            assert!(cover.contains_point(0, &[x]));
            assert!(!cover.contains_point(1, &[x]));
        }
        for x in 4..8 {
            assert!(cover.contains_point(1, &[x]));
            assert!(!cover.contains_point(0, &[x]));
        }
    }

    #[test]
    fn coverage_every_point_somewhere() {
        for dim in 1..=3u32 {
            let cover = ZdBrickCover::new(dim, 2).unwrap();
            let span: Vec<i64> = (-20..20).collect();
            let mut stack = vec![vec![]];
            for _ in 0..dim {
                let mut next = Vec::new();
                for p in &stack {
                    for &c in &span {
                        let mut q: Vec<i64> = p.clone();
                        q.push(c);
                        next.push(q);
                    }
                }
                stack = next;
            }
            for p in &stack {
                assert!(
                    (0..cover.family_count()).any(|f| cover.contains_point(f, p)),
                    "uncovered point {p:?} in dim {dim}"
                );
            }
        }
    }

    #[test]
    fn window_certificates_hold() {
        let cert = ZdBrickCover::new(1, 1).unwrap().verify_window(-30, 30);
        assert!(cert.holds());
        assert!(cert.max_diameter_per_family.iter().all(|&d| d <= 4));

        let cert = ZdBrickCover::new(2, 2).unwrap().verify_window(-15, 15);
        assert!(cert.holds());
    }

    #[test]
    fn singleton_window_is_trivially_certified() {
        let cert = ZdBrickCover::new(1, 1).unwrap().verify_window(0, 0);
        assert!(cert.holds());
    }
}
