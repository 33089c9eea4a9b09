//! Finite regions of Z^d: neighbor enumeration, boundary sets, centered
//! boxes, and k-interiors. Regions are immutable after construction and all
//! per-site arrays follow one fixed lexicographic site order, so downstream
//! results are reproducible across runs and safe to share between workers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of Z^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: Vec<i64>) -> Self {
        Site(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The 2d nearest neighbors, coordinate-major with minus before plus.
    pub fn neighbors(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(2 * self.0.len());
        for axis in 0..self.0.len() {
            for delta in [-1i64, 1] {
                let mut c = self.0.clone();
                c[axis] += delta;
                out.push(Site(c));
            }
        }
        out
    }

    /// l-infinity distance.
    pub fn linf_distance(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }
}

/// The set of external sites adjacent to a region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySet {
    /// Lexicographically sorted, disjoint from the region.
    pub sites: Vec<Site>,
}

impl BoundarySet {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

/// A finite subset of Z^d with its derived adjacency structure.
#[derive(Debug, Clone)]
pub struct LatticeRegion {
    d: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    neighbor_idx: Vec<Vec<usize>>,
    boundary: BoundarySet,
    boundary_index: HashMap<Site, usize>,
    /// Per region site: indices into `boundary.sites` of its external neighbors.
    boundary_adjacency: Vec<Vec<usize>>,
    n_internal_bonds: usize,
}

impl LatticeRegion {
    /// Region from an explicit site list. Sites are deduplicated into a fixed
    /// lexicographic order.
    pub fn from_sites(sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::domain("region must contain at least one site"));
        }
        let d = sites[0].dim();
        if d == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if sites.iter().any(|s| s.dim() != d) {
            return Err(Error::domain("all sites must share one dimension"));
        }
        let mut sites = sites;
        sites.sort();
        sites.dedup();

        let index: HashMap<Site, usize> = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();

        let mut neighbor_idx = vec![Vec::new(); sites.len()];
        let mut boundary_sites: Vec<Site> = Vec::new();
        let mut n_internal_bonds = 0;
        for (i, site) in sites.iter().enumerate() {
            for nb in site.neighbors() {
                match index.get(&nb) {
                    Some(&j) => {
                        neighbor_idx[i].push(j);
                        if i < j {
                            n_internal_bonds += 1;
                        }
                    }
                    None => boundary_sites.push(nb),
                }
            }
        }
        boundary_sites.sort();
        boundary_sites.dedup();
        let boundary_index: HashMap<Site, usize> = boundary_sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let boundary_adjacency = sites
            .iter()
            .map(|site| {
                site.neighbors()
                    .into_iter()
                    .filter_map(|nb| boundary_index.get(&nb).copied())
                    .collect()
            })
            .collect();

        Ok(LatticeRegion {
            d,
            sites,
            index,
            neighbor_idx,
            boundary: BoundarySet {
                sites: boundary_sites,
            },
            boundary_index,
            boundary_adjacency,
            n_internal_bonds,
        })
    }

    /// All sites within l-infinity distance `k` of `center`; (2k+1)^d sites.
    pub fn box_region(center: &Site, k: u32) -> Self {
        let d = center.dim();
        let mut sites = Vec::with_capacity((2 * k as usize + 1).pow(d as u32));
        let mut current = vec![0i64; d];
        enumerate_box(center, k as i64, 0, &mut current, &mut sites);
        Self::from_sites(sites).expect("box regions are nonempty and well formed")
    }

    /// Axis-aligned cube with coordinates in [0, side) on every axis.
    pub fn cube(d: usize, side: i64) -> Result<Self> {
        if d == 0 || side < 1 {
            return Err(Error::domain("cube needs d >= 1 and side >= 1"));
        }
        let mut sites = Vec::new();
        let mut current = vec![0i64; d];
        enumerate_cube(side, 0, &mut current, &mut sites);
        Self::from_sites(sites)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Sites in the fixed lexicographic order.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    pub fn site_index(&self, s: &Site) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index.contains_key(s)
    }

    /// Region-internal neighbors of site `i`, as indices.
    pub fn neighbor_indices(&self, i: usize) -> &[usize] {
        &self.neighbor_idx[i]
    }

    pub fn boundary(&self) -> &BoundarySet {
        &self.boundary
    }

    pub fn boundary_site_index(&self, s: &Site) -> Option<usize> {
        self.boundary_index.get(s).copied()
    }

    /// Indices into `boundary().sites` of the external neighbors of site `i`.
    pub fn boundary_adjacency(&self, i: usize) -> &[usize] {
        &self.boundary_adjacency[i]
    }

    pub fn n_internal_bonds(&self) -> usize {
        self.n_internal_bonds
    }

    /// The k-interior: sites whose centered box of radius k lies inside the
    /// region. For such a site the local neighborhood equals the full box.
    pub fn interior_indices(&self, k: u32) -> Vec<usize> {
        if k == 0 {
            return (0..self.sites.len()).collect();
        }
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, site)| self.contains_box(site, k))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn interior(&self, k: u32) -> Vec<Site> {
        self.interior_indices(k)
            .into_iter()
            .map(|i| self.sites[i].clone())
            .collect()
    }

    fn contains_box(&self, center: &Site, k: u32) -> bool {
        let mut current = vec![0i64; self.d];
        let mut all = true;
        let mut sites = Vec::new();
        enumerate_box(center, k as i64, 0, &mut current, &mut sites);
        for s in sites {
            if !self.contains(&s) {
                all = false;
                break;
            }
        }
        all
    }

    /// Detect an axis-aligned box: returns (min corner, per-axis extents).
    pub fn as_box(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let mut mins = self.sites[0].0.clone();
        let mut maxs = self.sites[0].0.clone();
        for s in &self.sites {
            for (axis, &c) in s.0.iter().enumerate() {
                mins[axis] = mins[axis].min(c);
                maxs[axis] = maxs[axis].max(c);
            }
        }
        let dims: Vec<i64> = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo + 1).collect();
        let volume: i64 = dims.iter().product();
        if volume == self.sites.len() as i64 {
            Some((mins, dims))
        } else {
            None
        }
    }

    /// For each site of `sub`, its index in `self`; None if `sub` is not
    /// contained in `self`.
    pub fn embed_indices(&self, sub: &LatticeRegion) -> Option<Vec<usize>> {
        sub.sites
            .iter()
            .map(|s| self.site_index(s))
            .collect::<Option<Vec<usize>>>()
    }
}

fn enumerate_box(center: &Site, k: i64, axis: usize, current: &mut [i64], out: &mut Vec<Site>) {
    if axis == center.dim() {
        out.push(Site(current.to_vec()));
        return;
    }
    for c in (center.0[axis] - k)..=(center.0[axis] + k) {
        current[axis] = c;
        enumerate_box(center, k, axis + 1, current, out);
    }
}

fn enumerate_cube(side: i64, axis: usize, current: &mut Vec<i64>, out: &mut Vec<Site>) {
    if axis == current.len() {
        out.push(Site(current.clone()));
        return;
    }
    for c in 0..side {
        current[axis] = c;
        enumerate_cube(side, axis + 1, current, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(coords: &[i64]) -> Site {
        Site::new(coords.to_vec())
    }

    #[test]
    fn neighbors_d1() {
        assert_eq!(s(&[0]).neighbors(), vec![s(&[-1]), s(&[1])]);
    }

    #[test]
    fn neighbors_d2_order() {
        assert_eq!(
            s(&[0, 0]).neighbors(),
            vec![s(&[-1, 0]), s(&[1, 0]), s(&[0, -1]), s(&[0, 1])]
        );
    }

    #[test]
    fn neighbors_d3_count_and_distance() {
        let nbs = s(&[1, 2, 3]).neighbors();
        assert_eq!(nbs.len(), 6);
        for nb in &nbs {
            let l1: i64 = nb.0.iter().zip(&[1, 2, 3]).map(|(a, b)| (a - b).abs()).sum();
            assert_eq!(l1, 1);
        }
    }

    #[test]
    fn box_region_sizes() {
        assert_eq!(LatticeRegion::box_region(&s(&[0]), 0).len(), 1);
        assert_eq!(LatticeRegion::box_region(&s(&[0, 0]), 1).len(), 9);
        let r = LatticeRegion::box_region(&s(&[5, 5]), 2);
        assert_eq!(r.len(), 25);
        let min = r.sites().iter().flat_map(|x| x.0.iter()).min().unwrap();
        let max = r.sites().iter().flat_map(|x| x.0.iter()).max().unwrap();
        assert_eq!((*min, *max), (3, 7));
    }

    #[test]
    fn boundary_of_single_site_d1() {
        let r = LatticeRegion::from_sites(vec![s(&[0])]).unwrap();
        assert_eq!(r.boundary().sites, vec![s(&[-1]), s(&[1])]);
    }

    #[test]
    fn boundary_counts_2d_boxes() {
        let b2 = LatticeRegion::cube(2, 2).unwrap();
        assert_eq!(b2.boundary().len(), 8);
        let b3 = LatticeRegion::cube(2, 3).unwrap();
        assert_eq!(b3.boundary().len(), 12);
    }

    #[test]
    fn boundary_is_external_and_adjacent() {
        for region in [
            LatticeRegion::cube(2, 3).unwrap(),
            LatticeRegion::box_region(&s(&[1, -2]), 2),
            LatticeRegion::from_sites(vec![s(&[0, 0]), s(&[1, 0]), s(&[5, 5])]).unwrap(),
        ] {
            for b in &region.boundary().sites {
                assert!(!region.contains(b));
                assert!(b.neighbors().iter().any(|nb| region.contains(nb)));
            }
            // completeness: scan the dilation of the region
            for site in region.sites() {
                for nb in site.neighbors() {
                    if !region.contains(&nb) {
                        assert!(region.boundary_site_index(&nb).is_some());
                    }
                }
            }
        }
    }

    #[test]
    fn interior_k0_is_region() {
        let r = LatticeRegion::cube(2, 3).unwrap();
        assert_eq!(r.interior_indices(0).len(), r.len());
    }

    #[test]
    fn interior_of_5x5_at_k1_is_central_3x3() {
        let r = LatticeRegion::cube(2, 5).unwrap();
        let inner = r.interior(1);
        assert_eq!(inner.len(), 9);
        for site in &inner {
            assert!(site.0.iter().all(|&c| (1..=3).contains(&c)));
        }
    }

    #[test]
    fn interior_empty_when_box_cannot_fit() {
        let r = LatticeRegion::cube(2, 3).unwrap();
        assert!(r.interior(2).is_empty());
    }

    #[test]
    fn interiors_are_nested() {
        let r = LatticeRegion::cube(2, 7).unwrap();
        for k in 1..4 {
            let outer = r.interior_indices(k - 1);
            let inner = r.interior_indices(k);
            assert!(inner.iter().all(|i| outer.contains(i)));
        }
    }

    #[test]
    fn boundary_to_volume_ratio_shrinks() {
        for d in [1usize, 2, 3] {
            let ratio = |side: i64| {
                let r = LatticeRegion::cube(d, side).unwrap();
                r.boundary().len() as f64 / r.len() as f64
            };
            assert!(ratio(8) < ratio(4));
        }
    }

    #[test]
    fn internal_bond_count_2d() {
        // L x L box has 2 L (L-1) internal bonds
        let r = LatticeRegion::cube(2, 3).unwrap();
        assert_eq!(r.n_internal_bonds(), 12);
    }

    #[test]
    fn embed_indices_roundtrip() {
        let big = LatticeRegion::cube(2, 5).unwrap();
        let small = LatticeRegion::box_region(&s(&[2, 2]), 1);
        let map = big.embed_indices(&small).unwrap();
        for (sub_i, &big_i) in map.iter().enumerate() {
            assert_eq!(small.site(sub_i), big.site(big_i));
        }
        let outside = LatticeRegion::box_region(&s(&[0, 0]), 1);
        assert!(big.embed_indices(&outside).is_none());
    }

    #[test]
    fn site_order_is_lexicographic() {
        let r = LatticeRegion::cube(2, 2).unwrap();
        let coords: Vec<Vec<i64>> = r.sites().iter().map(|x| x.0.clone()).collect();
        assert_eq!(
            coords,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
    }
}
