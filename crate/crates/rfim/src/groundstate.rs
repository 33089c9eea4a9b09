//! Zero-temperature machinery: exact ground states via a max-flow min-cut
//! reduction, local ground spins on boxes around a site, and the gradient of
//! the ground energy with respect to the underlying Gaussian coordinates.
//!
//! With the boundary folded into per-site fields h_i, minimizing the energy
//! is a minimum s/t cut: spins +1 sit on the source side. Capacities are
//! scaled to integers for an exact flow computation, and the returned energy
//! is always re-evaluated from the spin configuration in floating point.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::field::FieldRealization;
use crate::gibbs::{effective_field, hamiltonian, BoundaryCondition};
use crate::lattice::{LatticeRegion, Site};

/// Multiplier taking real capacities to the integer units used by the flow.
pub const CAPACITY_SCALE: f64 = 1e9;

/// A minimizing spin configuration with its energy, and the energy gradient
/// with respect to the Gaussian coordinates when the field carries them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundState {
    pub sigma_hat: Vec<i8>,
    pub energy: f64,
    pub gradient: Option<Vec<f64>>,
}

/// Dinic's algorithm over paired arcs: arc 2e and its reverse 2e+1.
struct MaxFlow {
    head: Vec<usize>,
    cap: Vec<u64>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl MaxFlow {
    fn new(nodes: usize) -> Self {
        MaxFlow {
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); nodes],
            level: vec![-1; nodes],
            iter: vec![0; nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap_fwd: u64, cap_rev: u64) {
        self.adj[from].push(self.head.len());
        self.head.push(to);
        self.cap.push(cap_fwd);
        self.adj[to].push(self.head.len());
        self.head.push(from);
        self.cap.push(cap_rev);
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &a in &self.adj[v] {
                let w = self.head[a];
                if self.cap[a] > 0 && self.level[w] < 0 {
                    self.level[w] = self.level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, v: usize, t: usize, limit: u64) -> u64 {
        if v == t {
            return limit;
        }
        while self.iter[v] < self.adj[v].len() {
            let a = self.adj[v][self.iter[v]];
            let w = self.head[a];
            if self.cap[a] > 0 && self.level[w] == self.level[v] + 1 {
                let pushed = self.dfs(w, t, limit.min(self.cap[a]));
                if pushed > 0 {
                    self.cap[a] -= pushed;
                    self.cap[a ^ 1] += pushed;
                    return pushed;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let mut flow = 0u64;
        while self.bfs(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let pushed = self.dfs(s, t, u64::MAX);
                if pushed == 0 {
                    break;
                }
                flow += pushed;
            }
        }
        flow
    }

    /// Nodes that can still reach t in the residual graph, found by a
    /// reverse sweep over arc pairs.
    fn residual_reaches_sink(&self, t: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[t] = true;
        let mut queue = VecDeque::from([t]);
        while let Some(w) = queue.pop_front() {
            for &a in &self.adj[w] {
                // arc a: w -> v, so its pair carries residual for v -> w
                let v = self.head[a];
                if !seen[v] && self.cap[a ^ 1] > 0 {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

fn to_units(c: f64) -> u64 {
    (c * CAPACITY_SCALE).round() as u64
}

/// Exact energy minimizer. Among degenerate minimizers this returns the one
/// with the largest set of +1 spins, so zero-field ties resolve upward.
pub fn ground_state_mincut(
    region: &LatticeRegion,
    bc: &BoundaryCondition,
    field: &FieldRealization,
) -> Result<GroundState> {
    let h = effective_field(region, bc, field)?;
    let n = region.len();
    let source = n;
    let sink = n + 1;
    let mut flow = MaxFlow::new(n + 2);
    for i in 0..n {
        for &j in region.neighbor_indices(i) {
            if i < j {
                let c = to_units(2.0);
                flow.add_edge(i, j, c, c);
            }
        }
        if h[i] > 0.0 {
            flow.add_edge(source, i, to_units(2.0 * h[i]), 0);
        } else if h[i] < 0.0 {
            flow.add_edge(i, sink, to_units(-2.0 * h[i]), 0);
        }
    }
    flow.max_flow(source, sink);
    // Maximal source side: everything that cannot reach the sink.
    let reaches_sink = flow.residual_reaches_sink(sink);
    let sigma_hat: Vec<i8> = (0..n).map(|i| if reaches_sink[i] { -1 } else { 1 }).collect();
    let energy = hamiltonian(region, bc, field, &sigma_hat)?;
    let gradient = match field.gaussian_coordinates() {
        Ok((_, uprime)) => Some(
            uprime
                .iter()
                .zip(&sigma_hat)
                .map(|(&up, &s)| -up * f64::from(s))
                .collect(),
        ),
        Err(_) => None,
    };
    Ok(GroundState {
        sigma_hat,
        energy,
        gradient,
    })
}

/// Ground spin at the center of the box of radius k around `center`, under
/// plus boundary conditions. `field` must hold one value per box site in the
/// box region's site order. At k=0 this is the sign of phi_i + 2d, with the
/// tie at exactly zero resolved to +1.
pub fn local_ground_spin(center: &Site, k: u32, field: &FieldRealization) -> Result<i8> {
    let region = LatticeRegion::box_region(center, k);
    if field.len() != region.len() {
        return Err(Error::domain(format!(
            "field has {} values, box of radius {k} has {} sites",
            field.len(),
            region.len()
        )));
    }
    let state = ground_state_mincut(&region, &BoundaryCondition::Plus, field)?;
    let idx = region
        .site_index(center)
        .expect("box region contains its center");
    Ok(state.sigma_hat[idx])
}

/// Gradient of the ground energy in the Gaussian coordinates:
/// component i is -u'(z_i) sigma_hat_i.
pub fn ground_gradient(field: &FieldRealization, sigma_hat: &[i8]) -> Result<Vec<f64>> {
    let (_, uprime) = field.gaussian_coordinates()?;
    if sigma_hat.len() != uprime.len() {
        return Err(Error::domain("spin configuration length mismatch"));
    }
    Ok(uprime
        .iter()
        .zip(sigma_hat)
        .map(|(&up, &s)| -up * f64::from(s))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_field, FieldModel};
    use crate::rng::{stream, Domain};
    use approx::assert_relative_eq;

    /// Exhaustive minimizer for small regions, picking +1 on energy ties of
    /// larger plus-count so the tie rule is comparable.
    fn brute_force(
        region: &LatticeRegion,
        bc: &BoundaryCondition,
        field: &FieldRealization,
    ) -> (Vec<i8>, f64) {
        let n = region.len();
        let mut best: Option<(Vec<i8>, f64, u32)> = None;
        for mask in 0u32..(1 << n) {
            let sigma: Vec<i8> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { 1 } else { -1 })
                .collect();
            let e = hamiltonian(region, bc, field, &sigma).unwrap();
            let plus = mask.count_ones();
            let better = match &best {
                None => true,
                Some((_, be, bp)) => e < be - 1e-12 || ((e - be).abs() <= 1e-12 && plus > *bp),
            };
            if better {
                best = Some((sigma, e, plus));
            }
        }
        let (sigma, e, _) = best.unwrap();
        (sigma, e)
    }

    #[test]
    fn uniform_plus_field_aligns_everything() {
        let r = LatticeRegion::cube(2, 3).unwrap();
        let f = FieldRealization::from_values(vec![0.5; r.len()]);
        let gs = ground_state_mincut(&r, &BoundaryCondition::Plus, &f).unwrap();
        assert!(gs.sigma_hat.iter().all(|&s| s == 1));
        let expect = hamiltonian(&r, &BoundaryCondition::Plus, &f, &vec![1; r.len()]).unwrap();
        assert_relative_eq!(gs.energy, expect);
    }

    #[test]
    fn strong_negative_field_overrides_boundary() {
        let r = LatticeRegion::cube(2, 2).unwrap();
        let f = FieldRealization::from_values(vec![-10.0; r.len()]);
        let gs = ground_state_mincut(&r, &BoundaryCondition::Plus, &f).unwrap();
        assert!(gs.sigma_hat.iter().all(|&s| s == -1));
        assert_relative_eq!(gs.energy, -36.0);
    }

    #[test]
    fn zero_field_ties_resolve_to_plus() {
        // single site in d=1 with phi = -2: effective field exactly zero
        let r = LatticeRegion::from_sites(vec![Site::new(vec![0])]).unwrap();
        let f = FieldRealization::from_values(vec![-2.0]);
        let gs = ground_state_mincut(&r, &BoundaryCondition::Plus, &f).unwrap();
        assert_eq!(gs.sigma_hat, vec![1]);
        assert_relative_eq!(gs.energy, 0.0);
        // interior ties on a zero-field box also go up
        let r2 = LatticeRegion::cube(2, 3).unwrap();
        let f2 = FieldRealization::from_values(vec![0.0; r2.len()]);
        let gs2 = ground_state_mincut(&r2, &BoundaryCondition::Minus, &f2).unwrap();
        assert!(gs2.sigma_hat.iter().all(|&s| s == -1));
        let gs3 = ground_state_mincut(&r2, &BoundaryCondition::Plus, &f2).unwrap();
        assert!(gs3.sigma_hat.iter().all(|&s| s == 1));
    }

    #[test]
    fn matches_exhaustive_search_on_random_fields() {
        let model = FieldModel::gaussian(0.0, 2.0);
        for (d, side) in [(1usize, 8i64), (2, 3), (2, 4)] {
            let r = LatticeRegion::cube(d, side).unwrap();
            if r.len() > 16 {
                continue;
            }
            for rep in 0..25 {
                let f = sample_field(&model, &r, &mut stream(7, Domain::Field, rep));
                for bc in [BoundaryCondition::Plus, BoundaryCondition::Minus] {
                    let gs = ground_state_mincut(&r, &bc, &f).unwrap();
                    let (sigma, e) = brute_force(&r, &bc, &f);
                    assert_relative_eq!(gs.energy, e, epsilon = 1e-9);
                    assert_eq!(gs.sigma_hat, sigma);
                }
            }
        }
    }

    #[test]
    fn energy_is_always_a_lower_bound_for_sampled_configurations() {
        let r = LatticeRegion::cube(2, 4).unwrap();
        let model = FieldModel::uniform(-2.0, 2.0);
        let f = sample_field(&model, &r, &mut stream(9, Domain::Field, 0));
        let gs = ground_state_mincut(&r, &BoundaryCondition::Plus, &f).unwrap();
        let mut probe = stream(9, Domain::Scratch, 0);
        for _ in 0..50 {
            let sigma: Vec<i8> = (0..r.len())
                .map(|i| if crate::rng::site_normal(&mut probe, i) > 0.0 { 1 } else { -1 })
                .collect();
            let e = hamiltonian(&r, &BoundaryCondition::Plus, &f, &sigma).unwrap();
            assert!(gs.energy <= e + 1e-9);
        }
    }

    #[test]
    fn local_ground_spin_radius_zero_is_sign_of_shifted_field() {
        for (phi, expect) in [(0.3, 1i8), (-3.9, 1), (-4.1, -1), (-4.0, 1)] {
            let f = FieldRealization::from_values(vec![phi]);
            let s = local_ground_spin(&Site::new(vec![0, 0]), 0, &f).unwrap();
            assert_eq!(s, expect, "phi = {phi}");
        }
    }

    #[test]
    fn local_ground_spin_shrinks_with_box_size() {
        // plus boundaries help: the spin on the smaller box dominates
        let center = Site::new(vec![0, 0]);
        let model = FieldModel::gaussian(0.0, 2.0);
        let outer = LatticeRegion::box_region(&center, 2);
        let inner = LatticeRegion::box_region(&center, 1);
        let embed = outer.embed_indices(&inner).unwrap();
        for rep in 0..40 {
            let f_outer = sample_field(&model, &outer, &mut stream(3, Domain::Field, rep));
            let f_inner = f_outer.restrict(&embed);
            let s_outer = local_ground_spin(&center, 2, &f_outer).unwrap();
            let s_inner = local_ground_spin(&center, 1, &f_inner).unwrap();
            assert!(s_inner >= s_outer, "rep {rep}");
        }
    }

    #[test]
    fn gradient_is_negative_slope_times_spin() {
        let r = LatticeRegion::cube(2, 3).unwrap();
        let model = FieldModel::uniform(-1.0, 3.0);
        let f = sample_field(&model, &r, &mut stream(12, Domain::Field, 5));
        let gs = ground_state_mincut(&r, &BoundaryCondition::Plus, &f).unwrap();
        let grad = gs.gradient.as_ref().expect("sampled fields carry coordinates");
        let (_, uprime) = f.gaussian_coordinates().unwrap();
        for i in 0..r.len() {
            assert_relative_eq!(grad[i], -uprime[i] * f64::from(gs.sigma_hat[i]));
        }
        let again = ground_gradient(&f, &gs.sigma_hat).unwrap();
        assert_eq!(&again, grad);
        // fields without coordinates have no gradient
        let bare = FieldRealization::from_values(f.phi.clone());
        assert!(ground_state_mincut(&r, &BoundaryCondition::Plus, &bare)
            .unwrap()
            .gradient
            .is_none());
        assert!(ground_gradient(&bare, &gs.sigma_hat).is_err());
    }

    #[test]
    fn large_box_solves_quickly() {
        let r = LatticeRegion::cube(2, 64).unwrap();
        let model = FieldModel::gaussian(0.0, 1.0);
        let f = sample_field(&model, &r, &mut stream(1, Domain::Field, 0));
        let start = std::time::Instant::now();
        let gs = ground_state_mincut(&r, &BoundaryCondition::Plus, &f).unwrap();
        assert!(gs.sigma_hat.len() == 4096);
        assert!(start.elapsed().as_secs_f64() < 1.0);
    }
}
