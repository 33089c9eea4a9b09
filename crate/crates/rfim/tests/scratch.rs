use std::time::Instant;

use rfim::explab::{run_energy_samples, ExperimentConfig};
use rfim::field::{sample_field, FieldModel};
use rfim::gibbs::{hamiltonian, BoundaryCondition, Temperature};
use rfim::groundstate::ground_state_mincut;
use rfim::lattice::LatticeRegion;
use rfim::metrics::distance_report;
use rfim::rng::{stream, Domain};

// exhaustive ground search over all 2^n configurations via Gray code
fn brute_ground(
    region: &LatticeRegion,
    bc: &BoundaryCondition,
    field: &rfim::FieldRealization,
) -> (Vec<i8>, f64) {
    let n = region.len();
    let mut sigma = vec![-1i8; n];
    let mut h = hamiltonian(region, bc, field, &sigma).unwrap();
    let mut best = h;
    let mut best_code = 0u64;
    let mut prev = 0u64;
    for m in 1u64..(1 << n) {
        let gray = m ^ (m >> 1);
        let bit = (gray ^ prev).trailing_zeros() as usize;
        prev = gray;
        // flip spin `bit`
        let old = sigma[bit];
        let mut delta = 0.0;
        for &j in region.neighbor_indices(bit) {
            delta += 2.0 * f64::from(old) * f64::from(sigma[j]);
        }
        let mut hb = 0.0;
        for &b in region.boundary_adjacency(bit) {
            hb += bc.value(b);
        }
        delta += 2.0 * f64::from(old) * (field.phi[bit] + hb);
        sigma[bit] = -old;
        h += delta;
        if h < best {
            best = h;
            best_code = gray;
        }
    }
    let spins: Vec<i8> = (0..n)
        .map(|i| if best_code >> i & 1 == 1 { 1 } else { -1 })
        .collect();
    // gray code walk started from all -1 with bit=1 meaning flipped to +1
    (spins, best)
}

#[test]
fn probe_mincut_at_scale() {
    for (a, b) in [(5i64, 5i64), (4, 6)] {
        for stddev in [1.0, 2.0] {
            let sites = (0..a)
                .flat_map(|x| (0..b).map(move |y| rfim::Site::new(vec![x, y])))
                .collect();
            let region = LatticeRegion::from_sites(sites).unwrap();
            let model = FieldModel::gaussian(0.0, stddev);
            let mut worst: f64 = 0.0;
            let mut spin_mismatch = 0;
            for seed in 0..30u64 {
                let field = sample_field(&model, &region, &mut stream(seed, Domain::Field, 0));
                let cut = ground_state_mincut(&region, &BoundaryCondition::Plus, &field).unwrap();
                let (spins, energy) = brute_ground(&region, &BoundaryCondition::Plus, &field);
                worst = worst.max((cut.energy - energy).abs());
                if spins != cut.sigma_hat {
                    spin_mismatch += 1;
                }
            }
            println!(
                "{a}x{b} sd={stddev}: worst |dG| = {worst:.2e}, spin mismatches = {spin_mismatch}/30"
            );
        }
    }
}

#[test]
fn probe_strong_disorder_decay() {
    for stddev in [2.0, 3.0] {
        let config = ExperimentConfig {
            d: 2,
            sides: vec![8, 16, 32],
            model: FieldModel::gaussian(0.0, stddev),
            temperature: Temperature::Infinite,
            bc: BoundaryCondition::Plus,
            reps: 2000,
            stein_reps: 100,
            k_schedule: vec![],
            quad_points: 16,
            master_seed: 20260822,
            workers: None,
            csv_path: None,
            json_path: None,
        };
        let t0 = Instant::now();
        let rec = run_energy_samples(&config).unwrap();
        let mut vs = Vec::new();
        for s in &rec.samples {
            let rep = distance_report(&s.energies).unwrap();
            let v = rep.variance / s.n_sites as f64;
            println!(
                "sd={stddev} side={} var/site={:.4} d_W={:.4} d_K={:.4}",
                s.side, v, rep.d_wasserstein, rep.d_kolmogorov
            );
            vs.push(v);
        }
        println!(
            "sd={stddev}: var gaps {:.4} then {:.4}; took {:.1?}",
            (vs[0] - vs[1]).abs(),
            (vs[1] - vs[2]).abs(),
            t0.elapsed()
        );
    }
}

#[test]
fn probe_sigma1_more_reps() {
    let config = ExperimentConfig {
        d: 2,
        sides: vec![8, 16, 32],
        model: FieldModel::gaussian(0.0, 1.0),
        temperature: Temperature::Infinite,
        bc: BoundaryCondition::Plus,
        reps: 10_000,
        stein_reps: 100,
        k_schedule: vec![],
        quad_points: 16,
        master_seed: 20260822,
        workers: None,
        csv_path: None,
        json_path: None,
    };
    let rec = run_energy_samples(&config).unwrap();
    for s in &rec.samples {
        let rep = distance_report(&s.energies).unwrap();
        println!(
            "sd=1 reps=1e4 side={} var/site={:.4} d_W={:.4} d_K={:.4}",
            s.side,
            rep.variance / s.n_sites as f64,
            rep.d_wasserstein,
            rep.d_kolmogorov
        );
    }
}
