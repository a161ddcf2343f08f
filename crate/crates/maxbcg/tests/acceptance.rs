//! Acceptance gate: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`).

use maxbcg::bcg::{chi_square, r200};
use maxbcg::catalog::{
    generate_synthetic_catalog, generate_synthetic_kcorr, BCGParams, Galaxy, PlantedCluster,
    RegionBounds,
};
use maxbcg::csvio;
use maxbcg::oracle::{brute_neighbors, brute_pipeline};
use maxbcg::partition::{run_partitioned, run_sequential, RunGeometry, RunResult};
use maxbcg::zone::{ZoneConfig, ZoneTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(name: &str, f: impl FnOnce() + std::panic::UnwindSafe) {
    match std::panic::catch_unwind(f) {
        Ok(()) => println!("{name}: PASS"),
        Err(e) => {
            println!("{name}: FAIL");
            std::panic::resume_unwind(e);
        }
    }
}

/// The three output files rendered to bytes, for byte-level equality checks.
fn render(result: &RunResult) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let mut cands = Vec::new();
    csvio::write_candidates(&mut cands, &result.candidates).unwrap();
    let mut clus = Vec::new();
    csvio::write_candidates(&mut clus, &result.clusters).unwrap();
    let mut mems = Vec::new();
    csvio::write_members(&mut mems, &result.members).unwrap();
    (cands, clus, mems)
}

fn spread_clusters() -> Vec<PlantedCluster> {
    vec![
        PlantedCluster { ra: 12.0, dec: -2.0, z: 0.06, members: 5 },
        PlantedCluster { ra: 15.0, dec: 1.5, z: 0.09, members: 7 },
        PlantedCluster { ra: 18.5, dec: -0.5, z: 0.12, members: 4 },
        PlantedCluster { ra: 22.0, dec: 2.2, z: 0.15, members: 6 },
        PlantedCluster { ra: 25.5, dec: -1.8, z: 0.19, members: 8 },
        PlantedCluster { ra: 28.0, dec: 0.8, z: 0.24, members: 5 },
    ]
}

#[test]
fn acceptance_1_partition_equality() {
    criterion("criterion 1 (partitioned runs byte-identical to sequential)", || {
        let kcorr = generate_synthetic_kcorr(1000, 0.5).unwrap();
        let params = BCGParams::default();
        let zcfg = ZoneConfig::default();
        let target = RegionBounds::new(10.0, 30.0, -3.0, 3.0).unwrap();
        let geo = RunGeometry::new(target, 0.5).unwrap();
        let clusters = spread_clusters();
        let cat =
            generate_synthetic_catalog(&geo.data_area, 10_000, &clusters, &kcorr, 20240817)
                .unwrap();
        assert!(cat.planted.len() >= 5);

        let seq = run_sequential(&cat.galaxies, &geo, &kcorr, &params, &zcfg).unwrap();
        assert!(!seq.clusters.is_empty());
        let base = render(&seq);
        for n in [1usize, 2, 3, 4, 8] {
            let par =
                run_partitioned(&cat.galaxies, &geo, &kcorr, &params, &zcfg, n, 4).unwrap();
            assert_eq!(render(&par), base, "partition count {n}");
        }
    });
}

#[test]
fn acceptance_2_oracle_equivalence() {
    criterion("criterion 2 (randomized agreement with the brute-force oracle)", || {
        let kcorr = generate_synthetic_kcorr(1000, 0.5).unwrap();
        let params = BCGParams::default();
        let zcfg = ZoneConfig::default();
        let radii = [0.01, 0.05, 0.25, 0.5, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(99);

        for trial in 0..100u32 {
            let seed = rng.random::<u64>();
            let region = RegionBounds::new(5.0, 355.0, -85.0, 85.0).unwrap();
            let galaxies =
                generate_synthetic_catalog(&region, 2000, &[], &kcorr, seed).unwrap().galaxies;
            let table = ZoneTable::build(galaxies.iter().map(|g| (g.objid, g.ra, g.dec)), zcfg);
            let ra = rng.random_range(7.0..353.0);
            let dec = rng.random_range(-83.0..83.0);
            let r = radii[rng.random_range(0..radii.len())];
            let mut fast = table.neighbors(ra, dec, r);
            let mut brute = brute_neighbors(&galaxies, ra, dec, r);
            fast.sort_by_key(|h| h.objid);
            brute.sort_by_key(|h| h.objid);
            assert_eq!(fast.len(), brute.len(), "trial {trial} seed {seed}");
            for (a, b) in fast.iter().zip(&brute) {
                assert_eq!(a.objid, b.objid, "trial {trial} seed {seed}");
                assert_eq!(
                    a.distance.to_bits(),
                    b.distance.to_bits(),
                    "trial {trial} seed {seed} objid {}",
                    a.objid
                );
            }
        }

        let target = RegionBounds::new(20.0, 24.0, -1.5, 1.5).unwrap();
        let geo = RunGeometry::new(target, 0.5).unwrap();
        for trial in 0..20u32 {
            let seed = rng.random::<u64>();
            let planted = [PlantedCluster { ra: 22.0, dec: 0.0, z: 0.09, members: 4 }];
            let cat =
                generate_synthetic_catalog(&geo.data_area, 400, &planted, &kcorr, seed).unwrap();
            assert!(cat.galaxies.len() <= 500);
            let brute = brute_pipeline(&cat.galaxies, &geo, &kcorr, &params).unwrap();
            let fast = run_sequential(&cat.galaxies, &geo, &kcorr, &params, &zcfg).unwrap();
            assert_eq!(render(&brute), render(&fast), "pipeline trial {trial} seed {seed}");
        }
    });
}

#[test]
fn acceptance_3_buffer_invariance() {
    criterion("criterion 3 (target-scoped results independent of buffer width)", || {
        let kcorr = generate_synthetic_kcorr(1000, 0.5).unwrap();
        let params = BCGParams::default();
        let zcfg = ZoneConfig::default();
        let target = RegionBounds::new(10.0, 30.0, -3.0, 3.0).unwrap();
        let geo_wide = RunGeometry::new(target, 0.8).unwrap();
        let geo_narrow = RunGeometry::new(target, 0.5).unwrap();
        // one catalog covering the widest data area, shared by both runs
        let cat =
            generate_synthetic_catalog(&geo_wide.data_area, 8_000, &spread_clusters(), &kcorr, 7)
                .unwrap();

        let narrow = run_sequential(&cat.galaxies, &geo_narrow, &kcorr, &params, &zcfg).unwrap();
        let wide = run_sequential(&cat.galaxies, &geo_wide, &kcorr, &params, &zcfg).unwrap();

        assert!(!narrow.clusters.is_empty());
        assert_eq!(narrow.clusters, wide.clusters);
        assert_eq!(narrow.members, wide.members);
        let in_target = |r: &RunResult| -> Vec<_> {
            r.candidates.iter().filter(|c| target.contains(c.ra, c.dec)).copied().collect()
        };
        assert_eq!(in_target(&narrow), in_target(&wide));
    });
}

#[test]
fn acceptance_4_formula_anchors() {
    criterion("criterion 4 (formula anchors and strict likelihood threshold)", || {
        assert!((r200(100.0) - 1.78).abs() < 5e-3);

        let kcorr = generate_synthetic_kcorr(1000, 0.5).unwrap();
        let k50 = kcorr.lookup_z(0.05).unwrap();
        assert!((k50.radius - 0.74 / 1.78).abs() < 1e-3);

        // a galaxy sitting exactly on a k-entry scores chi-square zero
        let k = kcorr.lookup_z(0.1).unwrap();
        let params = BCGParams::default();
        let g = Galaxy {
            objid: 1,
            ra: 20.0,
            dec: 0.0,
            i: k.i,
            gr: k.gr,
            ri: k.ri,
            sigmagr: 0.005,
            sigmari: 0.005,
        };
        assert_eq!(chi_square(&g, k, &params), 0.0);

        // the threshold is strict: a score exactly at the cutoff is rejected
        let off = Galaxy { gr: k.gr + 0.2, ..g };
        let chisq = chi_square(&off, k, &params);
        assert!(chisq > 0.0);
        let mut at_cutoff = params.clone();
        at_cutoff.chisq_threshold = chisq;
        let passing = maxbcg::bcg::filter_redshifts(&off, &kcorr, &at_cutoff);
        assert!(passing.iter().all(|s| s.zid != k.zid));
        at_cutoff.chisq_threshold = chisq * (1.0 + 1e-12);
        let passing = maxbcg::bcg::filter_redshifts(&off, &kcorr, &at_cutoff);
        assert!(passing.iter().any(|s| s.zid == k.zid));
    });
}

#[test]
fn acceptance_5_planted_recovery() {
    criterion("criterion 5 (planted clusters recovered exactly, no field noise)", || {
        let kcorr = generate_synthetic_kcorr(1000, 0.5).unwrap();
        let params = BCGParams::default();
        let zcfg = ZoneConfig::default();
        let target = RegionBounds::new(10.0, 30.0, -3.0, 3.0).unwrap();
        let geo = RunGeometry::new(target, 0.5).unwrap();
        let clusters = spread_clusters();
        let cat = generate_synthetic_catalog(&geo.data_area, 0, &clusters, &kcorr, 11).unwrap();

        let result = run_sequential(&cat.galaxies, &geo, &kcorr, &params, &zcfg).unwrap();

        let mut expected_bcgs: Vec<u64> = cat.planted.iter().map(|p| p.bcg_objid).collect();
        expected_bcgs.sort();
        let found_bcgs: Vec<u64> = result.clusters.iter().map(|c| c.objid).collect();
        assert_eq!(found_bcgs, expected_bcgs);

        for planted in &cat.planted {
            let cl = result.clusters.iter().find(|c| c.objid == planted.bcg_objid).unwrap();
            assert_eq!(cl.ngal as usize, planted.member_objids.len() + 1);
            assert!((cl.z - planted.z).abs() < 1e-12);

            let mut expected: Vec<u64> = planted.member_objids.clone();
            expected.push(planted.bcg_objid);
            expected.sort();
            let mut got: Vec<u64> = result
                .members
                .iter()
                .filter(|m| m.cluster_objid == planted.bcg_objid)
                .map(|m| m.galaxy_objid)
                .collect();
            got.sort();
            assert_eq!(got, expected, "members of cluster {}", planted.bcg_objid);
        }
    });
}

#[test]
fn acceptance_6_scale_and_parallelism() {
    criterion("criterion 6 (large-catalog run: redundancy bounded, speedup when multicore)", || {
        let kcorr = generate_synthetic_kcorr(1000, 0.5).unwrap();
        let params = BCGParams::default();
        let zcfg = ZoneConfig::default();
        let target = RegionBounds::new(10.0, 30.0, -4.0, 4.0).unwrap();
        let geo = RunGeometry::new(target, 0.5).unwrap();
        let cat =
            generate_synthetic_catalog(&geo.data_area, 200_000, &spread_clusters(), &kcorr, 5)
                .unwrap();
        assert!(cat.galaxies.len() >= 200_000);

        let t0 = std::time::Instant::now();
        let seq = run_sequential(&cat.galaxies, &geo, &kcorr, &params, &zcfg).unwrap();
        let wall_seq = t0.elapsed().as_secs_f64();
        let t0 = std::time::Instant::now();
        let par = run_partitioned(&cat.galaxies, &geo, &kcorr, &params, &zcfg, 3, 4).unwrap();
        let wall_par = t0.elapsed().as_secs_f64();

        assert_eq!(render(&par), render(&seq));

        let ratio = par.total_work() as f64 / seq.total_work() as f64;
        println!("  work ratio 3-way/sequential: {ratio:.3}");
        assert!((1.0..=1.6).contains(&ratio), "work ratio {ratio}");

        let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        if cores >= 4 {
            println!("  wall: sequential {wall_seq:.2}s, 3-way {wall_par:.2}s");
            assert!(wall_par <= 0.7 * wall_seq, "wall {wall_par} vs {wall_seq}");
        } else {
            println!("  wall-time clause SKIP: only {cores} core(s) available");
        }
    });
}

#[test]
fn acceptance_7_documentation() {
    criterion("criterion 7 (README documents build, test, and CLI usage)", || {
        let readme = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../README.md"
        ))
        .expect("README.md at workspace root");
        for needle in ["cargo build", "cargo test", "generate", "find-clusters", "compare",
                       "bench", "oracle-check", "--seed", "--partitions"] {
            assert!(readme.contains(needle), "README missing {needle:?}");
        }
    });
}
