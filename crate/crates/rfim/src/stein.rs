//! Normal-approximation statistics built from coordinate resampling and
//! Gaussian interpolation: the variance statistic T, the localized statistic
//! S with its closed-form subset weights, local approximants of the
//! energy-difference and energy-gradient coordinates, moment-norm profiles,
//! the box-decay estimator, and the computable Wasserstein/total-variation
//! bounds they plug into.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sample_field, FieldModel, FieldRealization};
use crate::gibbs::{self, delta_f_from_magnetization, BoundaryCondition, Temperature};
use crate::groundstate::ground_state_mincut;
use crate::lattice::LatticeRegion;
use crate::numeric::{gauss_legendre_unit, lp_norm_estimate, mean_estimate, Estimate};
use crate::rng::{site_normal, stream, Domain};

/// Law of the resampled index set A over subsets of {0..n-1} excluding one
/// coordinate: P(A) = 1 / (n * C(n-1, |A|)), realized by drawing |A|
/// uniformly on {0..n-1} and then a uniform subset of that size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetLaw {
    n: usize,
}

impl SubsetLaw {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("subset law needs at least one coordinate"));
        }
        Ok(SubsetLaw { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// One draw of A, a subset of {0..n-1}\{i}, returned sorted.
pub fn sample_subset(law: SubsetLaw, i: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = law.n;
    debug_assert!(i < n, "excluded coordinate out of range");
    let size = rng.gen_range(0..n);
    let mut pool: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    // partial Fisher-Yates: the first `size` entries become a uniform subset
    for s in 0..size {
        let j = rng.gen_range(s..pool.len());
        pool.swap(s, j);
    }
    pool.truncate(size);
    pool.sort_unstable();
    pool
}

fn big_binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

/// Exact probability of one specific subset of size `a1` under the law on
/// subsets of a neighborhood with `n0` sites excluding its center:
/// 1 / (n0 * C(n0-1, a1)). Independent of the ambient region size.
pub fn subset_weight_closed_form(n0: usize, a1: usize) -> Result<BigRational> {
    if n0 == 0 || a1 + 1 > n0 {
        return Err(Error::domain(format!(
            "subset size {a1} is out of range for {n0} coordinates"
        )));
    }
    let denom = BigInt::from(n0 as u64) * big_binomial(n0 as u64 - 1, a1 as u64);
    Ok(BigRational::new(BigInt::one(), denom))
}

/// Exact total mass of the subset law: sum over sizes of
/// C(n0-1, a1) * weight(n0, a1). Equals 1 for every n0.
pub fn subset_weight_total(n0: usize) -> Result<BigRational> {
    if n0 == 0 {
        return Err(Error::domain("subset law needs at least one coordinate"));
    }
    let mut total = BigRational::zero();
    for a1 in 0..n0 {
        total += BigRational::from(big_binomial(n0 as u64 - 1, a1 as u64))
            * subset_weight_closed_form(n0, a1)?;
    }
    Ok(total)
}

/// Both sides of the binomial-ratio summation identity
/// sum_{k=0}^{n} C(n,k)/C(n+m,k+l) = (n+m+1)/((m+1)*C(m,l)),
/// evaluated in exact rational arithmetic so equality can be asserted.
pub fn beta_subset_identity(n: usize, m: usize, l: usize) -> Result<(BigRational, BigRational)> {
    if l > m {
        return Err(Error::domain(format!(
            "identity requires m >= l >= 0, got m = {m}, l = {l}"
        )));
    }
    let (n64, m64, l64) = (n as u64, m as u64, l as u64);
    let mut lhs = BigRational::zero();
    for k in 0..=n64 {
        lhs += BigRational::new(big_binomial(n64, k), big_binomial(n64 + m64, k + l64));
    }
    let rhs = BigRational::new(
        BigInt::from(n64 + m64 + 1),
        BigInt::from(m64 + 1) * big_binomial(m64, l64),
    );
    Ok((lhs, rhs))
}

/// Componentwise sqrt(t) z + sqrt(1-t) z', the Gaussian path between an
/// independent pair that keeps each coordinate standard normal.
pub fn gaussian_interpolant(z: &[f64], z_prime: &[f64], t: f64) -> Result<Vec<f64>> {
    if z.len() != z_prime.len() {
        return Err(Error::domain("interpolant arrays differ in length"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!(
            "interpolation parameter must lie in [0, 1], got {t}"
        )));
    }
    let (a, b) = (t.sqrt(), (1.0 - t).sqrt());
    Ok(z.iter()
        .zip(z_prime)
        .map(|(&x, &y)| a * x + b * y)
        .collect())
}

/// Monte Carlo estimate of E(T), whose value is Var f(X) for independent
/// coordinates. One replication draws X, an independent copy X', a uniform
/// coordinate i and a subset A, and evaluates
/// (n/2) [f(X) - f(X with coordinate i resampled)]
///       [f(X^A) - f(X^A with coordinate i resampled)].
pub fn estimate_t<S, F>(n: usize, reps: usize, master: u64, sampler: S, f: F) -> Result<Estimate>
where
    S: Fn(&mut ChaCha8Rng, usize) -> f64 + Sync,
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n == 0 {
        return Err(Error::domain("estimator needs at least one coordinate"));
    }
    if reps < 2 {
        return Err(Error::domain("standard error needs at least two replications"));
    }
    let law = SubsetLaw::new(n)?;
    let values: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut sx = stream(master, Domain::Field, rep);
            let mut sp = stream(master, Domain::FieldPrime, rep);
            let x: Vec<f64> = (0..n).map(|j| sampler(&mut sx, j)).collect();
            let x_prime: Vec<f64> = (0..n).map(|j| sampler(&mut sp, j)).collect();
            let mut rs = stream(master, Domain::Resample, rep);
            let i = rs.gen_range(0..n);
            let a = sample_subset(law, i, &mut rs);
            let mut xa = x.clone();
            for &j in &a {
                xa[j] = x_prime[j];
            }
            let mut xi = x.clone();
            xi[i] = x_prime[i];
            let mut xai = xa.clone();
            xai[i] = x_prime[i];
            0.5 * n as f64 * (f(&x) - f(&xi)) * (f(&xa) - f(&xai))
        })
        .collect();
    Ok(mean_estimate(&values))
}

/// Truncated boxes N_i = (box of radius k around site i) intersected with
/// the region, with the bookkeeping the localized statistics need: where
/// the center sits inside each N_i, how N_i's sites map back to region
/// indices, which sites have their full box inside the region, and which
/// pairs of neighborhoods intersect.
#[derive(Debug, Clone)]
pub struct NeighborhoodSystem {
    pub k: u32,
    pub regions: Vec<LatticeRegion>,
    pub center_index: Vec<usize>,
    pub embed: Vec<Vec<usize>>,
    pub interior_indices: Vec<usize>,
    overlap: Vec<Vec<usize>>,
}

impl NeighborhoodSystem {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// All j (including i itself) whose neighborhood intersects N_i.
    pub fn overlap_partners(&self, i: usize) -> &[usize] {
        &self.overlap[i]
    }

    /// Number of ordered pairs (i, j), diagonal included, with
    /// N_i intersecting N_j.
    pub fn overlap_count(&self) -> usize {
        self.overlap.iter().map(Vec::len).sum()
    }
}

fn sorted_intersects(a: &[usize], b: &[usize]) -> bool {
    let (mut p, mut q) = (0, 0);
    while p < a.len() && q < b.len() {
        match a[p].cmp(&b[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Build the neighborhood system of radius k over a region.
pub fn neighborhood_system(region: &LatticeRegion, k: u32) -> NeighborhoodSystem {
    let n = region.len();
    let mut regions = Vec::with_capacity(n);
    let mut center_index = Vec::with_capacity(n);
    let mut embed = Vec::with_capacity(n);
    for i in 0..n {
        let center = region.site(i);
        let full_box = LatticeRegion::box_region(center, k);
        let kept: Vec<_> = full_box
            .sites()
            .iter()
            .filter(|s| region.contains(s))
            .cloned()
            .collect();
        let sub = LatticeRegion::from_sites(kept).expect("neighborhood contains its center");
        center_index.push(sub.site_index(center).expect("center is kept"));
        embed.push(
            sub.sites()
                .iter()
                .map(|s| region.site_index(s).expect("kept sites are in the region"))
                .collect::<Vec<_>>(),
        );
        regions.push(sub);
    }
    // Boxes around i and j intersect inside a box-shaped region exactly when
    // the centers are within 2k; general regions fall back to comparing the
    // (sorted) member lists.
    let is_box = region.as_box().is_some();
    let overlap: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    if is_box {
                        region.site(i).linf_distance(region.site(j)) <= 2 * i64::from(k)
                    } else {
                        sorted_intersects(&embed[i], &embed[j])
                    }
                })
                .collect()
        })
        .collect();
    NeighborhoodSystem {
        k,
        regions,
        center_index,
        embed,
        interior_indices: region.interior_indices(k),
        overlap,
    }
}

/// Local finite-temperature approximant of the free energy change under a
/// single-site field replacement, computed on N_i instead of the whole
/// region: (1/beta) log(cosh(alpha_i) + <sigma_i>_{N_i} sinh(alpha_i)).
/// Shares delta_f's orientation, so with N_i covering the region it equals
/// delta_f exactly.
pub fn local_g_finite(
    region: &LatticeRegion,
    i: usize,
    k: u32,
    field: &FieldRealization,
    phi_prime_i: f64,
    beta: f64,
    bc: &BoundaryCondition,
) -> Result<f64> {
    let center = region.site(i);
    let full_box = LatticeRegion::box_region(center, k);
    let kept: Vec<_> = full_box
        .sites()
        .iter()
        .filter(|s| region.contains(s))
        .cloned()
        .collect();
    let sub = LatticeRegion::from_sites(kept)?;
    let embed: Vec<usize> = sub
        .sites()
        .iter()
        .map(|s| region.site_index(s).expect("kept sites are in the region"))
        .collect();
    let center_idx = sub.site_index(center).expect("center is kept");
    local_g_solved(&sub, center_idx, &embed, field, phi_prime_i, beta, bc)
}

/// The same local approximant over a prebuilt neighborhood system.
pub fn local_g_finite_with(
    ns: &NeighborhoodSystem,
    i: usize,
    field: &FieldRealization,
    phi_prime_i: f64,
    beta: f64,
    bc: &BoundaryCondition,
) -> Result<f64> {
    local_g_solved(
        &ns.regions[i],
        ns.center_index[i],
        &ns.embed[i],
        field,
        phi_prime_i,
        beta,
        bc,
    )
}

fn local_g_solved(
    sub: &LatticeRegion,
    center_idx: usize,
    embed: &[usize],
    field: &FieldRealization,
    phi_prime_i: f64,
    beta: f64,
    bc: &BoundaryCondition,
) -> Result<f64> {
    let local_field = field.restrict(embed);
    let solution = gibbs::solve(sub, bc, &local_field, beta)?;
    Ok(delta_f_from_magnetization(
        solution.magnetization[center_idx],
        local_field.phi[center_idx],
        phi_prime_i,
        beta,
    ))
}

/// Local zero-temperature approximant of the energy gradient coordinate:
/// -u'(z_i) times the center ground spin of N_i under plus boundaries.
pub fn local_g_ground_with(
    ns: &NeighborhoodSystem,
    i: usize,
    field: &FieldRealization,
) -> Result<f64> {
    let (_, uprime) = field.gaussian_coordinates()?;
    let local_field = field.restrict(&ns.embed[i]);
    let state = ground_state_mincut(&ns.regions[i], &BoundaryCondition::Plus, &local_field)?;
    Ok(-uprime[i] * f64::from(state.sigma_hat[ns.center_index[i]]))
}

/// Convenience form on a stand-alone box realization: the field must cover
/// box_region(center, k) in its site order.
pub fn local_g_ground(
    center: &crate::lattice::Site,
    k: u32,
    field: &FieldRealization,
) -> Result<f64> {
    let region = LatticeRegion::box_region(center, k);
    let idx = region.site_index(center).expect("box contains its center");
    let (_, uprime) = field.gaussian_coordinates()?;
    if field.len() != region.len() {
        return Err(Error::domain("field does not cover the box"));
    }
    let spin = crate::groundstate::local_ground_spin(center, k, field)?;
    Ok(-uprime[idx] * f64::from(spin))
}

/// Per-site L^p norms of the exact coordinate differences (or gradients)
/// and of their gap to the local approximants, with jackknife standard
/// errors. Only the norms the bounds consume are kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentProfile {
    pub m2: Vec<Estimate>,
    pub m3: Vec<Estimate>,
    pub m4: Vec<Estimate>,
    pub eps2: Vec<Estimate>,
    pub eps4: Vec<Estimate>,
}

impl MomentProfile {
    pub fn n_sites(&self) -> usize {
        self.m2.len()
    }
}

/// Estimate a moment profile from two per-replication evaluators sharing
/// the replication index (and therefore the underlying realizations): one
/// producing the exact per-site differences or gradients, one the local
/// approximants.
pub fn estimate_moment_profile<D, G>(
    n_sites: usize,
    reps: usize,
    delta_eval: D,
    g_eval: G,
) -> Result<MomentProfile>
where
    D: Fn(u64) -> Result<Vec<f64>> + Sync,
    G: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if reps < 100 {
        return Err(Error::domain(
            "moment profiles need at least 100 replications",
        ));
    }
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<(Vec<f64>, Vec<f64>)> {
            let d = delta_eval(rep)?;
            let g = g_eval(rep)?;
            if d.len() != n_sites || g.len() != n_sites {
                return Err(Error::domain("evaluator returned wrong number of sites"));
            }
            Ok((d, g))
        })
        .collect::<Result<_>>()?;
    let mut m2 = Vec::with_capacity(n_sites);
    let mut m3 = Vec::with_capacity(n_sites);
    let mut m4 = Vec::with_capacity(n_sites);
    let mut eps2 = Vec::with_capacity(n_sites);
    let mut eps4 = Vec::with_capacity(n_sites);
    for i in 0..n_sites {
        let deltas: Vec<f64> = rows.iter().map(|(d, _)| d[i]).collect();
        let gaps: Vec<f64> = rows.iter().map(|(d, g)| d[i] - g[i]).collect();
        m2.push(lp_norm_estimate(&deltas, 2));
        m3.push(lp_norm_estimate(&deltas, 3));
        m4.push(lp_norm_estimate(&deltas, 4));
        eps2.push(lp_norm_estimate(&gaps, 2));
        eps4.push(lp_norm_estimate(&gaps, 4));
    }
    Ok(MomentProfile {
        m2,
        m3,
        m4,
        eps2,
        eps4,
    })
}

fn phi_prime_at(model: &FieldModel, master: u64, rep: u64, site: usize) -> f64 {
    let mut sp = stream(master, Domain::FieldPrime, rep);
    let z = site_normal(&mut sp, site);
    model.pushforward_eval(z).0
}

/// Moment profile of the finite-temperature free energy differences against
/// their neighborhood approximants.
pub fn moment_profile_finite(
    region: &LatticeRegion,
    ns: &NeighborhoodSystem,
    model: &FieldModel,
    beta: f64,
    bc: &BoundaryCondition,
    reps: usize,
    master: u64,
) -> Result<MomentProfile> {
    model.validate()?;
    let n = region.len();
    let delta_eval = |rep: u64| -> Result<Vec<f64>> {
        let field = sample_field(model, region, &mut stream(master, Domain::Field, rep));
        let solution = gibbs::solve(region, bc, &field, beta)?;
        Ok((0..n)
            .map(|i| {
                delta_f_from_magnetization(
                    solution.magnetization[i],
                    field.phi[i],
                    phi_prime_at(model, master, rep, i),
                    beta,
                )
            })
            .collect())
    };
    let g_eval = |rep: u64| -> Result<Vec<f64>> {
        let field = sample_field(model, region, &mut stream(master, Domain::Field, rep));
        (0..n)
            .map(|i| {
                local_g_finite_with(
                    ns,
                    i,
                    &field,
                    phi_prime_at(model, master, rep, i),
                    beta,
                    bc,
                )
            })
            .collect()
    };
    estimate_moment_profile(n, reps, delta_eval, g_eval)
}

/// Moment profile of the ground-energy gradient coordinates against their
/// neighborhood approximants.
pub fn moment_profile_ground(
    region: &LatticeRegion,
    ns: &NeighborhoodSystem,
    model: &FieldModel,
    reps: usize,
    master: u64,
) -> Result<MomentProfile> {
    model.validate()?;
    let n = region.len();
    let delta_eval = |rep: u64| -> Result<Vec<f64>> {
        let field = sample_field(model, region, &mut stream(master, Domain::Field, rep));
        let state = ground_state_mincut(region, &BoundaryCondition::Plus, &field)?;
        state
            .gradient
            .ok_or_else(|| Error::domain("sampled fields carry Gaussian coordinates"))
    };
    let g_eval = |rep: u64| -> Result<Vec<f64>> {
        let field = sample_field(model, region, &mut stream(master, Domain::Field, rep));
        (0..n).map(|i| local_g_ground_with(ns, i, &field)).collect()
    };
    estimate_moment_profile(n, reps, delta_eval, g_eval)
}

/// Estimate of E(S) = sum_i E(S_i), where S_i pairs the local approximant at
/// i on X with the one on X resampled over a subset of N_i\{i}. Interior
/// sites share one representative estimate by translation invariance; the
/// remaining sites are estimated individually.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SEstimate {
    pub total: Estimate,
    /// Per-site value at the interior representative (the a_k sequence
    /// entry), when the interior is nonempty.
    pub interior_per_site: Option<Estimate>,
    pub n_interior: usize,
}

fn s_single_draw(
    ns: &NeighborhoodSystem,
    i: usize,
    field: &FieldRealization,
    model: &FieldModel,
    beta: f64,
    bc: &BoundaryCondition,
    master: u64,
    rep: u64,
    rs: &mut ChaCha8Rng,
) -> Result<f64> {
    let n_i = ns.regions[i].len();
    let law = SubsetLaw::new(n_i)?;
    let subset = sample_subset(law, ns.center_index[i], rs);
    let phi_prime_i = phi_prime_at(model, master, rep, i);
    let g_base = local_g_finite_with(ns, i, field, phi_prime_i, beta, bc)?;
    let mut resampled = field.clone();
    for &local in &subset {
        let base = ns.embed[i][local];
        resampled = resampled.with_phi(base, phi_prime_at(model, master, rep, base));
    }
    let g_resampled = local_g_finite_with(ns, i, &resampled, phi_prime_i, beta, bc)?;
    Ok(0.5 * g_base * g_resampled)
}

/// The interior representative (if any) and the individually estimated
/// sites, in the order their values appear in each replication row.
fn s_targets(ns: &NeighborhoodSystem) -> (Option<usize>, Vec<usize>) {
    let interior = &ns.interior_indices;
    let representative = interior.get(interior.len() / 2).copied();
    let individual: Vec<usize> = (0..ns.len()).filter(|i| !interior.contains(i)).collect();
    (representative, individual)
}

/// Fold per-replication rows (representative first when present, then the
/// individual sites) into the total and the per-site interior estimate.
fn combine_s_rows(
    rows: &[Vec<f64>],
    has_representative: bool,
    n_interior: usize,
    n_individual: usize,
) -> SEstimate {
    let column = |c: usize| -> Vec<f64> { rows.iter().map(|r| r[c]).collect() };
    let mut total = 0.0;
    let mut var = 0.0;
    let mut interior_per_site = None;
    let mut offset = 0;
    if has_representative {
        let est = mean_estimate(&column(0));
        let count = n_interior as f64;
        total += count * est.value;
        var += (count * est.stderr).powi(2);
        interior_per_site = Some(est);
        offset = 1;
    }
    for j in 0..n_individual {
        let est = mean_estimate(&column(offset + j));
        total += est.value;
        var += est.stderr * est.stderr;
    }
    SEstimate {
        total: Estimate::new(total, var.sqrt()),
        interior_per_site,
        n_interior,
    }
}

/// Monte Carlo estimate of E(S) at finite temperature.
pub fn estimate_s_finite(
    region: &LatticeRegion,
    ns: &NeighborhoodSystem,
    model: &FieldModel,
    beta: f64,
    bc: &BoundaryCondition,
    reps: usize,
    master: u64,
) -> Result<SEstimate> {
    model.validate()?;
    if reps < 2 {
        return Err(Error::domain("standard error needs at least two replications"));
    }
    let (representative, individual) = s_targets(ns);
    let rows: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let field = sample_field(model, region, &mut stream(master, Domain::Field, rep));
            let mut rs = stream(master, Domain::Resample, rep);
            let mut row = Vec::with_capacity(individual.len() + 1);
            if let Some(c) = representative {
                row.push(s_single_draw(ns, c, &field, model, beta, bc, master, rep, &mut rs)?);
            }
            for &i in &individual {
                row.push(s_single_draw(ns, i, &field, model, beta, bc, master, rep, &mut rs)?);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(combine_s_rows(
        &rows,
        representative.is_some(),
        ns.interior_indices.len(),
        individual.len(),
    ))
}

/// Coupled Monte Carlo estimate of the box-decay quantity: the expected
/// absolute gap between the center observable (magnetization at finite
/// temperature, ground spin at infinite) on the box of radius k and on the
/// reference box of radius k_ref, both with plus boundaries and a shared
/// field realization. Monotonicity in the box makes the gap one-sided.
pub fn estimate_delta_k(
    d: usize,
    model: &FieldModel,
    k: u32,
    k_ref: u32,
    temperature: Temperature,
    reps: usize,
    master: u64,
) -> Result<Estimate> {
    model.validate()?;
    temperature.validate()?;
    if d == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    if k_ref < k {
        return Err(Error::domain(format!(
            "reference radius {k_ref} must not be smaller than k = {k}"
        )));
    }
    if k_ref == k {
        return Ok(Estimate::new(0.0, 0.0));
    }
    if reps < 2 {
        return Err(Error::domain("standard error needs at least two replications"));
    }
    let origin = crate::lattice::Site::new(vec![0; d]);
    let outer = LatticeRegion::box_region(&origin, k_ref);
    let inner = LatticeRegion::box_region(&origin, k);
    let embed = outer
        .embed_indices(&inner)
        .expect("the smaller box nests in the reference box");
    let center_quantity = |region: &LatticeRegion, field: &FieldRealization| -> Result<f64> {
        let idx = region.site_index(&origin).expect("boxes contain the origin");
        match temperature {
            Temperature::Finite(beta) => {
                Ok(gibbs::solve(region, &BoundaryCondition::Plus, field, beta)?.magnetization[idx])
            }
            Temperature::Infinite => {
                let state = ground_state_mincut(region, &BoundaryCondition::Plus, field)?;
                Ok(f64::from(state.sigma_hat[idx]))
            }
        }
    };
    let gaps: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let field = sample_field(model, &outer, &mut stream(master, Domain::Field, rep));
            let m_ref = center_quantity(&outer, &field)?;
            let m_k = center_quantity(&inner, &field.restrict(&embed))?;
            Ok((m_k - m_ref).abs())
        })
        .collect::<Result<_>>()?;
    Ok(mean_estimate(&gaps))
}

/// Monte Carlo estimate of the interpolated statistic
/// S = integral over t of g(Z) . g(Z^t) / (2 sqrt(t)): substituting t = u^2
/// turns it into the singularity-free integral of g(Z) . g(Z^{u^2}) du on
/// [0,1], evaluated by Gauss-Legendre quadrature per replication.
pub fn estimate_s_continuous<G>(
    n: usize,
    reps: usize,
    quad_points: usize,
    master: u64,
    g: G,
) -> Result<Estimate>
where
    G: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if n == 0 {
        return Err(Error::domain("estimator needs at least one coordinate"));
    }
    if quad_points < 8 {
        return Err(Error::domain("quadrature needs at least 8 points"));
    }
    if reps < 2 {
        return Err(Error::domain("standard error needs at least two replications"));
    }
    let (nodes, weights) = gauss_legendre_unit(quad_points);
    let values: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut sz = stream(master, Domain::Field, rep);
            let mut sp = stream(master, Domain::FieldPrime, rep);
            let z: Vec<f64> = (0..n).map(|j| site_normal(&mut sz, j)).collect();
            let z_prime: Vec<f64> = (0..n).map(|j| site_normal(&mut sp, j)).collect();
            let g_z = g(&z)?;
            if g_z.len() != n {
                return Err(Error::domain("evaluator returned wrong number of sites"));
            }
            let mut acc = 0.0;
            for (&u, &w) in nodes.iter().zip(&weights) {
                let zt = gaussian_interpolant(&z, &z_prime, u * u)?;
                let g_t = g(&zt)?;
                let dot: f64 = g_z.iter().zip(&g_t).map(|(a, b)| a * b).sum();
                acc += w * dot;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(mean_estimate(&values))
}

/// The interpolated statistic with the zero-temperature local approximants
/// as g: per site, -u'(z_i) times the center ground spin of N_i. Shares the
/// interior-representative decomposition with the finite-temperature S, so
/// the per-site sequence entry is available here too.
pub fn estimate_s_ground(
    region: &LatticeRegion,
    ns: &NeighborhoodSystem,
    model: &FieldModel,
    reps: usize,
    quad_points: usize,
    master: u64,
) -> Result<SEstimate> {
    model.validate()?;
    if quad_points < 8 {
        return Err(Error::domain("quadrature needs at least 8 points"));
    }
    if reps < 2 {
        return Err(Error::domain("standard error needs at least two replications"));
    }
    let n = region.len();
    let (nodes, weights) = gauss_legendre_unit(quad_points);
    let (representative, individual) = s_targets(ns);
    let targets: Vec<usize> = representative
        .into_iter()
        .chain(individual.iter().copied())
        .collect();
    let rows: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut sz = stream(master, Domain::Field, rep);
            let mut sp = stream(master, Domain::FieldPrime, rep);
            let z: Vec<f64> = (0..n).map(|j| site_normal(&mut sz, j)).collect();
            let z_prime: Vec<f64> = (0..n).map(|j| site_normal(&mut sp, j)).collect();
            let field_z = FieldRealization::from_coordinates(model, z.clone());
            let g_base: Vec<f64> = targets
                .iter()
                .map(|&i| local_g_ground_with(ns, i, &field_z))
                .collect::<Result<_>>()?;
            let mut row = vec![0.0f64; targets.len()];
            for (&u, &w) in nodes.iter().zip(&weights) {
                let zt = gaussian_interpolant(&z, &z_prime, u * u)?;
                let field_t = FieldRealization::from_coordinates(model, zt);
                for (slot, &i) in targets.iter().enumerate() {
                    row[slot] += w * g_base[slot] * local_g_ground_with(ns, i, &field_t)?;
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(combine_s_rows(
        &rows,
        representative.is_some(),
        ns.interior_indices.len(),
        individual.len(),
    ))
}

/// Everything one normal-approximation bound evaluation reports: the
/// statistics feeding it, the variance in use, the bound value with its
/// additive terms, and the bound on how far the variance can sit from E(S).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinReport {
    pub estimate_t: Option<Estimate>,
    pub estimate_s: Option<Estimate>,
    pub variance_estimate: f64,
    pub bound_wasserstein: Option<f64>,
    pub bound_tv: Option<f64>,
    pub terms: Vec<f64>,
    pub variance_gap_bound: f64,
}

fn check_bound_inputs(
    profile: &MomentProfile,
    nbhd: &NeighborhoodSystem,
    sigma2: f64,
) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::domain(format!(
            "variance must be positive and finite, got {sigma2}"
        )));
    }
    if profile.n_sites() != nbhd.len() {
        return Err(Error::domain(
            "moment profile and neighborhood system cover different site counts",
        ));
    }
    let all = [
        &profile.m2,
        &profile.m3,
        &profile.m4,
        &profile.eps2,
        &profile.eps4,
    ];
    if all
        .iter()
        .any(|v| v.iter().any(|e| e.value < 0.0 || !e.value.is_finite()))
    {
        return Err(Error::domain("moment norms must be nonnegative and finite"));
    }
    Ok(())
}

fn overlap_root(profile: &MomentProfile, nbhd: &NeighborhoodSystem) -> f64 {
    let combined: Vec<f64> = (0..profile.n_sites())
        .map(|i| profile.m4[i].value + profile.eps4[i].value)
        .collect();
    let mut sum = 0.0;
    for i in 0..profile.n_sites() {
        for &j in nbhd.overlap_partners(i) {
            sum += combined[i].powi(2) * combined[j].powi(2);
        }
    }
    sum.sqrt()
}

/// Wasserstein bound for the resampling (finite-temperature) statistics:
/// (1/2 sigma^2) sum (2 eps4 m4 + eps4^2)
/// + (1/2 sigma^2) sqrt(sum over intersecting pairs of (m4+eps4)^2 (m4+eps4)^2)
/// + (1/2 sigma^3) sum m3^3,
/// together with the variance-gap bound (1/2) sum (2 eps2 m2 + eps2^2).
pub fn bound_normcomb(
    profile: &MomentProfile,
    nbhd: &NeighborhoodSystem,
    sigma2: f64,
) -> Result<SteinReport> {
    check_bound_inputs(profile, nbhd, sigma2)?;
    let n = profile.n_sites();
    let eps_sum: f64 = (0..n)
        .map(|i| {
            let (m4, e4) = (profile.m4[i].value, profile.eps4[i].value);
            2.0 * e4 * m4 + e4 * e4
        })
        .sum();
    let term1 = eps_sum / (2.0 * sigma2);
    let term2 = overlap_root(profile, nbhd) / (2.0 * sigma2);
    let sigma3 = sigma2 * sigma2.sqrt();
    let term3 = (0..n).map(|i| profile.m3[i].value.powi(3)).sum::<f64>() / (2.0 * sigma3);
    let variance_gap_bound = 0.5
        * (0..n)
            .map(|i| {
                let (m2, e2) = (profile.m2[i].value, profile.eps2[i].value);
                2.0 * e2 * m2 + e2 * e2
            })
            .sum::<f64>();
    Ok(SteinReport {
        estimate_t: None,
        estimate_s: None,
        variance_estimate: sigma2,
        bound_wasserstein: Some(term1 + term2 + term3),
        bound_tv: None,
        terms: vec![term1, term2, term3],
        variance_gap_bound,
    })
}

/// Total-variation bound for the interpolation (Gaussian-gradient)
/// statistics: (2/sigma^2) sum (2 eps4 m4 + eps4^2)
/// + (2/sigma^2) sqrt(overlap sum), with variance-gap bound
/// sum (2 eps2 m2 + eps2^2).
pub fn bound_normcont(
    profile: &MomentProfile,
    nbhd: &NeighborhoodSystem,
    sigma2: f64,
) -> Result<SteinReport> {
    check_bound_inputs(profile, nbhd, sigma2)?;
    let n = profile.n_sites();
    let eps_sum: f64 = (0..n)
        .map(|i| {
            let (m4, e4) = (profile.m4[i].value, profile.eps4[i].value);
            2.0 * e4 * m4 + e4 * e4
        })
        .sum();
    let term1 = 2.0 * eps_sum / sigma2;
    let term2 = 2.0 * overlap_root(profile, nbhd) / sigma2;
    let variance_gap_bound = (0..n)
        .map(|i| {
            let (m2, e2) = (profile.m2[i].value, profile.eps2[i].value);
            2.0 * e2 * m2 + e2 * e2
        })
        .sum::<f64>();
    Ok(SteinReport {
        estimate_t: None,
        estimate_s: None,
        variance_estimate: sigma2,
        bound_wasserstein: None,
        bound_tv: Some(term1 + term2),
        terms: vec![term1, term2],
        variance_gap_bound,
    })
}
