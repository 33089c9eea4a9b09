//! Exact finite-temperature quantities: Hamiltonian, log-partition, free
//! energy and per-site magnetizations, via full state enumeration on small
//! regions and a transfer matrix on d=2 rectangles, plus the closed-form free
//! energy change under a single-site field replacement.
//!
//! Boundary spins enter the energy linearly, so every solver folds them into
//! an effective per-site field h_i = phi_i + sum of adjacent boundary spins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldRealization;
use crate::lattice::{LatticeRegion, Site};
use crate::numeric::pairwise_sum;

/// Largest region size solved by full enumeration (2^n states).
pub const ENUMERATION_CUTOFF: usize = 24;
/// Largest transverse side handled by the transfer matrix (2^m state space).
pub const TRANSFER_CUTOFF: usize = 20;

/// A finite inverse temperature, or the zero-temperature (ground-state)
/// limit where free energy degenerates to minimum energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Temperature {
    Finite(f64),
    Infinite,
}

impl Temperature {
    pub fn beta(&self) -> Option<f64> {
        match self {
            Temperature::Finite(beta) => Some(*beta),
            Temperature::Infinite => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Temperature::Infinite)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Temperature::Finite(beta) => check_beta(*beta),
            Temperature::Infinite => Ok(()),
        }
    }
}

/// Fixed +-1 spins on the boundary set of a region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Plus,
    Minus,
    /// One +-1 value per boundary site, in the boundary set's site order.
    Explicit(Vec<i8>),
}

impl BoundaryCondition {
    pub fn validate(&self, region: &LatticeRegion) -> Result<()> {
        match self {
            BoundaryCondition::Explicit(values) => {
                if values.len() != region.boundary().len() {
                    return Err(Error::domain(format!(
                        "explicit boundary has {} values, boundary set has {} sites",
                        values.len(),
                        region.boundary().len()
                    )));
                }
                if values.iter().any(|v| v.abs() != 1) {
                    return Err(Error::domain("boundary spins must be +1 or -1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Spin at the boundary site with the given index in the boundary order.
    pub fn value(&self, boundary_index: usize) -> f64 {
        match self {
            BoundaryCondition::Plus => 1.0,
            BoundaryCondition::Minus => -1.0,
            BoundaryCondition::Explicit(values) => f64::from(values[boundary_index]),
        }
    }
}

/// Exact finite-beta solution for one (region, boundary, field, beta).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsSolution {
    pub beta: f64,
    pub log_partition: f64,
    pub free_energy: f64,
    pub magnetization: Vec<f64>,
}

fn check_inputs(
    region: &LatticeRegion,
    bc: &BoundaryCondition,
    field: &FieldRealization,
) -> Result<()> {
    bc.validate(region)?;
    if field.len() != region.len() {
        return Err(Error::domain(format!(
            "field has {} values, region has {} sites",
            field.len(),
            region.len()
        )));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain(format!(
            "inverse temperature must be positive and finite, got {beta}"
        )));
    }
    Ok(())
}

/// Per-site field with the boundary bonds folded in:
/// h_i = phi_i + sum of boundary spins adjacent to i.
pub fn effective_field(
    region: &LatticeRegion,
    bc: &BoundaryCondition,
    field: &FieldRealization,
) -> Result<Vec<f64>> {
    check_inputs(region, bc, field)?;
    Ok((0..region.len())
        .map(|i| {
            let b: f64 = region
                .boundary_adjacency(i)
                .iter()
                .map(|&bidx| bc.value(bidx))
                .sum();
            field.phi[i] + b
        })
        .collect())
}

/// Energy of one spin configuration: each unordered adjacent pair inside the
/// region counts once, plus the boundary bond and field terms.
pub fn hamiltonian(
    region: &LatticeRegion,
    bc: &BoundaryCondition,
    field: &FieldRealization,
    sigma: &[i8],
) -> Result<f64> {
    check_inputs(region, bc, field)?;
    if sigma.len() != region.len() {
        return Err(Error::domain("spin configuration length mismatch"));
    }
    let h = effective_field(region, bc, field)?;
    let mut pair = 0.0;
    let mut site = 0.0;
    for i in 0..region.len() {
        let si = f64::from(sigma[i]);
        for &j in region.neighbor_indices(i) {
            if i < j {
                pair += si * f64::from(sigma[j]);
            }
        }
        site += si * h[i];
    }
    Ok(-pair - site)
}

/// Exact solve by Gray-code walk over all 2^n configurations.
pub fn solve_enumeration(
    region: &LatticeRegion,
    bc: &BoundaryCondition,
    field: &FieldRealization,
    beta: f64,
) -> Result<GibbsSolution> {
    check_inputs(region, bc, field)?;
    check_beta(beta)?;
    let n = region.len();
    if n > ENUMERATION_CUTOFF {
        return Err(Error::EnumerationCapacity {
            sites: n,
            cutoff: ENUMERATION_CUTOFF,
        });
    }
    let h = effective_field(region, bc, field)?;

    // Energy change when flipping site b away from its current value:
    // H_new - H_old = 2 sigma_b (neighbor spin sum + h_b).
    let flip_delta = |sigma: &[i8], b: usize| {
        let nbr: f64 = region
            .neighbor_indices(b)
            .iter()
            .map(|&j| f64::from(sigma[j]))
            .sum();
        2.0 * f64::from(sigma[b]) * (nbr + h[b])
    };

    let start = vec![-1i8; n];
    let h0 = hamiltonian(region, bc, field, &start)?;
    let states = 1u64 << n;

    // First walk: ground energy for log-sum-exp shifting.
    let mut sigma = start.clone();
    let mut energy = h0;
    let mut e_min = energy;
    for t in 1..states {
        let b = t.trailing_zeros() as usize;
        energy += flip_delta(&sigma, b);
        sigma[b] = -sigma[b];
        e_min = e_min.min(energy);
    }

    // Second walk: shifted partition sum and per-site spin accumulators.
    let mut sigma = start;
    let mut energy = h0;
    let mut z_shift = (-beta * (energy - e_min)).exp();
    let mut spin_acc = vec![0.0f64; n];
    for (i, &s) in sigma.iter().enumerate() {
        spin_acc[i] += f64::from(s) * z_shift;
    }
    for t in 1..states {
        let b = t.trailing_zeros() as usize;
        energy += flip_delta(&sigma, b);
        sigma[b] = -sigma[b];
        let w = (-beta * (energy - e_min)).exp();
        z_shift += w;
        for (i, &s) in sigma.iter().enumerate() {
            spin_acc[i] += f64::from(s) * w;
        }
    }

    let log_partition = z_shift.ln() - beta * e_min;
    Ok(GibbsSolution {
        beta,
        log_partition,
        free_energy: -log_partition / beta,
        magnetization: spin_acc
            .iter()
            .map(|&a| (a / z_shift).clamp(-1.0, 1.0))
            .collect(),
    })
}

fn unsupported(reason: &str) -> Error {
    Error::UnsupportedShape {
        cutoff: TRANSFER_CUTOFF,
        reason: reason.to_string(),
    }
}

/// Exact solve of a d=2 axis-aligned box by a column-to-column transfer
/// operator over the 2^m states of the shorter side. The inter-column
/// operator factorizes over rows, so applying it costs m 2^m instead of 4^m;
/// running products are max-renormalized with log-scale accumulation.
/// Magnetizations come from one forward and one backward sweep.
pub fn solve_transfer_matrix(
    region: &LatticeRegion,
    bc: &BoundaryCondition,
    field: &FieldRealization,
    beta: f64,
) -> Result<GibbsSolution> {
    check_inputs(region, bc, field)?;
    check_beta(beta)?;
    if region.dim() != 2 {
        return Err(unsupported("region is not two-dimensional"));
    }
    let (_, dims) = region
        .as_box()
        .ok_or_else(|| unsupported("region is not an axis-aligned box"))?;
    let (row_axis, m, ncols) = if dims[0] <= dims[1] {
        (0usize, dims[0] as usize, dims[1] as usize)
    } else {
        (1, dims[1] as usize, dims[0] as usize)
    };
    if m > TRANSFER_CUTOFF {
        return Err(unsupported("shorter side exceeds the state-space cutoff"));
    }
    let h = effective_field(region, bc, field)?;
    let nstates = 1usize << m;
    // Lexicographic site index of (column c, row r).
    let site = |c: usize, r: usize| -> usize {
        if row_axis == 0 {
            r * ncols + c
        } else {
            c * m + r
        }
    };
    let spin = |s: usize, r: usize| -> f64 {
        if s >> r & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    };

    // Intra-column vertical bond sums, shared by every column.
    let mut vbond = vec![0.0f64; nstates];
    for (s, vb) in vbond.iter_mut().enumerate() {
        for r in 0..m.saturating_sub(1) {
            *vb += spin(s, r) * spin(s, r + 1);
        }
    }
    // Max-shifted within-column weights for one column, plus the shift.
    let column_weights = |c: usize| -> (Vec<f64>, f64) {
        let mut lw = vec![0.0f64; nstates];
        let mut mx = f64::NEG_INFINITY;
        for (s, l) in lw.iter_mut().enumerate() {
            let mut fs = 0.0;
            for r in 0..m {
                fs += spin(s, r) * h[site(c, r)];
            }
            *l = beta * (fs + vbond[s]);
            mx = mx.max(*l);
        }
        (lw.iter().map(|&l| (l - mx).exp()).collect(), mx)
    };
    // Inter-column operator: product over rows of exp(beta s_r s'_r),
    // applied as one in-place butterfly pass per row.
    let eb = beta.exp();
    let emb = (-beta).exp();
    let couple = |v: &mut [f64]| {
        for r in 0..m {
            let bit = 1usize << r;
            for s in 0..nstates {
                if s & bit == 0 {
                    let lo = v[s];
                    let hi = v[s | bit];
                    v[s] = eb * lo + emb * hi;
                    v[s | bit] = emb * lo + eb * hi;
                }
            }
        }
    };
    let renormalize = |v: &mut [f64]| -> f64 {
        let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for x in v.iter_mut() {
            *x /= mx;
        }
        mx.ln()
    };

    // Forward sweep. For each column keep the coupled predecessor vector
    // (everything left of the column) and the column's own weights; their
    // product continues rightward.
    let mut log_acc = 0.0f64;
    let mut pred: Vec<Vec<f64>> = Vec::with_capacity(ncols);
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(ncols);
    let mut v = vec![1.0f64; nstates];
    for c in 0..ncols {
        pred.push(v.clone());
        let (w, shift) = column_weights(c);
        log_acc += shift;
        for s in 0..nstates {
            v[s] *= w[s];
        }
        weights.push(w);
        if c + 1 < ncols {
            couple(&mut v);
            log_acc += renormalize(&mut v);
        }
    }
    let log_partition = log_acc + pairwise_sum(&v).ln();

    // Backward sweep: successor vectors close the probability of each
    // column state as pred * own weight * succ.
    let mut magnetization = vec![0.0f64; region.len()];
    let mut succ = vec![1.0f64; nstates];
    let mut prob = vec![0.0f64; nstates];
    for c in (0..ncols).rev() {
        for s in 0..nstates {
            prob[s] = pred[c][s] * weights[c][s] * succ[s];
        }
        let total = pairwise_sum(&prob);
        for r in 0..m {
            let mut acc = 0.0;
            for (s, &p) in prob.iter().enumerate() {
                acc += spin(s, r) * p;
            }
            magnetization[site(c, r)] = (acc / total).clamp(-1.0, 1.0);
        }
        if c > 0 {
            for s in 0..nstates {
                succ[s] *= weights[c][s];
            }
            couple(&mut succ);
            renormalize(&mut succ);
        }
    }

    Ok(GibbsSolution {
        beta,
        log_partition,
        free_energy: -log_partition / beta,
        magnetization,
    })
}

/// Solve with the cheapest applicable exact method: transfer matrix for d=2
/// boxes within the cutoff, enumeration otherwise.
pub fn solve(
    region: &LatticeRegion,
    bc: &BoundaryCondition,
    field: &FieldRealization,
    beta: f64,
) -> Result<GibbsSolution> {
    if region.dim() == 2 {
        if let Some((_, dims)) = region.as_box() {
            if dims[0].min(dims[1]) as usize <= TRANSFER_CUTOFF {
                return solve_transfer_matrix(region, bc, field, beta);
            }
        }
    }
    solve_enumeration(region, bc, field, beta)
}

/// log E[e^{alpha sigma}] = log(cosh(alpha) + mag * sinh(alpha)), evaluated
/// in a form that cannot overflow for large |alpha|.
pub fn tilted_log_moment(mag: f64, alpha: f64) -> f64 {
    let m = mag.clamp(-1.0, 1.0);
    if alpha >= 0.0 {
        alpha + (0.5 * (1.0 + m) + 0.5 * (1.0 - m) * (-2.0 * alpha).exp()).ln()
    } else {
        -alpha + (0.5 * (1.0 - m) + 0.5 * (1.0 + m) * (2.0 * alpha).exp()).ln()
    }
}

/// Free energy change F(phi) - F(phi with site i's value replaced), in
/// closed form from the site's magnetization:
/// (1/beta) log(cosh(alpha_i) + <sigma_i> sinh(alpha_i)),
/// alpha_i = beta (phi'_i - phi_i).
pub fn delta_f(
    region: &LatticeRegion,
    bc: &BoundaryCondition,
    field: &FieldRealization,
    i: &Site,
    phi_prime_i: f64,
    beta: f64,
) -> Result<f64> {
    let idx = region
        .site_index(i)
        .ok_or_else(|| Error::domain("site is not in the region"))?;
    let solution = solve(region, bc, field, beta)?;
    Ok(delta_f_from_magnetization(
        solution.magnetization[idx],
        field.phi[idx],
        phi_prime_i,
        beta,
    ))
}

/// Same closed form, from an already computed magnetization.
pub fn delta_f_from_magnetization(mag_i: f64, phi_i: f64, phi_prime_i: f64, beta: f64) -> f64 {
    let alpha = beta * (phi_prime_i - phi_i);
    tilted_log_moment(mag_i, alpha) / beta
}
