//! Brute-force reference implementations used to validate the zone-indexed
//! engine on small instances: an O(n^2) neighbor search and an index-free
//! transcription of the full pipeline. Same arithmetic, no pruning.

use crate::bcg::{filter_redshifts, r200, weighted_likelihood, Candidate, ClusterMember};
use crate::catalog::{BCGParams, Galaxy, KCorrTable};
use crate::partition::{RunGeometry, RunMetrics, RunResult};
use crate::zone::{unit_vector, NeighborHit};
use anyhow::Result;
use std::collections::HashMap;

const D2R: f64 = std::f64::consts::PI / 180.0;

/// Tests the chord cutoff against every galaxy.
pub fn brute_neighbors(galaxies: &[Galaxy], ra: f64, dec: f64, r: f64) -> Vec<NeighborHit> {
    let (qx, qy, qz) = unit_vector(ra, dec);
    let r2 = 4.0 * ((r / 2.0) * D2R).sin().powi(2);
    galaxies
        .iter()
        .filter_map(|g| {
            let (cx, cy, cz) = unit_vector(g.ra, g.dec);
            let chord2 = (cx - qx).powi(2) + (cy - qy).powi(2) + (cz - qz).powi(2);
            (r2 > chord2).then_some(NeighborHit { objid: g.objid, distance: chord2.sqrt() / D2R })
        })
        .collect()
}

fn brute_candidate(
    g: &Galaxy,
    loaded: &[Galaxy],
    galaxies: &HashMap<u64, Galaxy>,
    kcorr: &KCorrTable,
    p: &BCGParams,
) -> Option<Candidate> {
    let mut scores = filter_redshifts(g, kcorr, p);
    if scores.is_empty() {
        return None;
    }

    // window over the passing k-entries
    let mut rad = f64::NEG_INFINITY;
    let mut imax = f64::NEG_INFINITY;
    let mut grmin = f64::INFINITY;
    let mut grmax = f64::NEG_INFINITY;
    let mut rimin = f64::INFINITY;
    let mut rimax = f64::NEG_INFINITY;
    for s in &scores {
        let k = &kcorr.entries[(s.zid - 1) as usize];
        rad = rad.max(k.radius);
        imax = imax.max(k.ilim);
        grmin = grmin.min(k.gr);
        grmax = grmax.max(k.gr);
        rimin = rimin.min(k.ri);
        rimax = rimax.max(k.ri);
    }
    grmin -= 2.0 * p.gr_pop_sigma;
    grmax += 2.0 * p.gr_pop_sigma;
    rimin -= 2.0 * p.ri_pop_sigma;
    rimax += 2.0 * p.ri_pop_sigma;

    let friends: Vec<(f64, Galaxy)> = brute_neighbors(loaded, g.ra, g.dec, rad)
        .into_iter()
        .filter(|h| h.objid != g.objid)
        .filter_map(|h| {
            let f = galaxies.get(&h.objid)?;
            (f.i >= g.i
                && f.i <= imax
                && f.gr >= grmin
                && f.gr <= grmax
                && f.ri >= rimin
                && f.ri <= rimax)
                .then_some((h.distance, *f))
        })
        .collect();

    for s in scores.iter_mut() {
        let k = &kcorr.entries[(s.zid - 1) as usize];
        s.ngal = friends
            .iter()
            .filter(|(d, f)| {
                *d < k.radius
                    && f.i >= g.i
                    && f.i <= k.ilim
                    && f.gr >= k.gr - p.gr_pop_sigma
                    && f.gr <= k.gr + p.gr_pop_sigma
                    && f.ri >= k.ri - p.ri_pop_sigma
                    && f.ri <= k.ri + p.ri_pop_sigma
            })
            .count() as u32;
    }

    let best = scores
        .iter()
        .filter(|s| s.ngal > 0)
        .map(|s| weighted_likelihood(s.ngal, s.chisq))
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    let chosen = scores
        .iter()
        .find(|s| s.ngal > 0 && (weighted_likelihood(s.ngal, s.chisq) - best).abs() < p.chi_select_tol)?;
    Some(Candidate {
        objid: g.objid,
        ra: g.ra,
        dec: g.dec,
        z: chosen.z,
        i: g.i,
        ngal: chosen.ngal + 1,
        chi2: best,
    })
}

/// Index-free transcription of the full pipeline. Meant for catalogs of a
/// few hundred objects; it recomputes every pairwise distance.
pub fn brute_pipeline(
    galaxies: &[Galaxy],
    geometry: &RunGeometry,
    kcorr: &KCorrTable,
    params: &BCGParams,
) -> Result<RunResult> {
    let loaded: Vec<Galaxy> = galaxies
        .iter()
        .filter(|g| geometry.data_area.contains(g.ra, g.dec))
        .copied()
        .collect();
    let galaxy_map: HashMap<u64, Galaxy> = loaded.iter().map(|g| (g.objid, *g)).collect();

    let mut candidates: Vec<Candidate> = loaded
        .iter()
        .filter(|g| geometry.candidate_area.contains(g.ra, g.dec))
        .filter_map(|g| brute_candidate(g, &loaded, &galaxy_map, kcorr, params))
        .collect();
    candidates.sort_by_key(|c| c.objid);

    let mut clusters = Vec::new();
    for c in &candidates {
        if !geometry.target.contains(c.ra, c.dec) {
            continue;
        }
        let k = kcorr.lookup_z(c.z)?;
        let (qx, qy, qz) = unit_vector(c.ra, c.dec);
        let r2 = 4.0 * ((k.radius / 2.0) * D2R).sin().powi(2);
        let best = candidates
            .iter()
            .filter(|n| {
                let (cx, cy, cz) = unit_vector(n.ra, n.dec);
                let chord2 = (cx - qx).powi(2) + (cy - qy).powi(2) + (cz - qz).powi(2);
                r2 > chord2 && n.z >= c.z - params.z_window && n.z <= c.z + params.z_window
            })
            .map(|n| n.chi2)
            .fold(f64::NEG_INFINITY, f64::max);
        if (best - c.chi2).abs() < params.chi_tie_tol {
            clusters.push(*c);
        }
    }

    let mut members = Vec::new();
    for cl in &clusters {
        let k = kcorr.lookup_z(cl.z)?;
        let rad = k.radius * r200(cl.ngal as f64);
        members.push(ClusterMember { cluster_objid: cl.objid, galaxy_objid: cl.objid, distance: 0.0 });
        for h in brute_neighbors(&loaded, cl.ra, cl.dec, rad) {
            if h.objid == cl.objid {
                continue;
            }
            let g = &galaxy_map[&h.objid];
            if h.distance < rad
                && g.i >= cl.i - params.member_mag_slack
                && g.i <= k.ilim
                && g.gr >= k.gr - params.gr_pop_sigma
                && g.gr <= k.gr + params.gr_pop_sigma
                && g.ri >= k.ri - params.ri_pop_sigma
                && g.ri <= k.ri + params.ri_pop_sigma
            {
                members.push(ClusterMember {
                    cluster_objid: cl.objid,
                    galaxy_objid: h.objid,
                    distance: h.distance,
                });
            }
        }
    }
    members.sort_by_key(|m| (m.cluster_objid, m.galaxy_objid));

    Ok(RunResult { candidates, clusters, members, partition_metrics: vec![RunMetrics::default()] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{
        generate_synthetic_catalog, generate_synthetic_kcorr, PlantedCluster, RegionBounds,
    };
    use crate::partition::run_sequential;
    use crate::zone::ZoneConfig;

    #[test]
    fn brute_neighbors_empty_and_self() {
        assert!(brute_neighbors(&[], 10.0, 0.0, 0.5).is_empty());
        let g = Galaxy {
            objid: 3,
            ra: 10.0,
            dec: 0.0,
            i: 18.0,
            gr: 1.0,
            ri: 0.5,
            sigmagr: 0.01,
            sigmari: 0.01,
        };
        let hits = brute_neighbors(&[g], 10.0, 0.0, 0.5);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].distance, 0.0);
    }

    #[test]
    fn single_galaxy_never_a_candidate() {
        let kcorr = generate_synthetic_kcorr(1000, 0.5).unwrap();
        let params = BCGParams::default();
        let target = RegionBounds::new(20.0, 24.0, -1.0, 1.0).unwrap();
        let geo = RunGeometry::new(target, 0.5).unwrap();
        let k = &kcorr.entries[99];
        let g = Galaxy {
            objid: 1,
            ra: 22.0,
            dec: 0.0,
            i: k.i,
            gr: k.gr,
            ri: k.ri,
            sigmagr: 0.005,
            sigmari: 0.005,
        };
        let r = brute_pipeline(&[g], &geo, &kcorr, &params).unwrap();
        assert!(r.candidates.is_empty());
    }

    #[test]
    fn matches_run_sequential_on_seeded_catalogs() {
        let kcorr = generate_synthetic_kcorr(1000, 0.5).unwrap();
        let params = BCGParams::default();
        let zcfg = ZoneConfig::default();
        let target = RegionBounds::new(20.0, 24.0, -1.5, 1.5).unwrap();
        let geo = RunGeometry::new(target, 0.5).unwrap();
        for seed in 0..3u64 {
            let clusters = [PlantedCluster { ra: 21.0 + seed as f64, dec: 0.0, z: 0.09, members: 4 }];
            let cat =
                generate_synthetic_catalog(&geo.data_area, 300, &clusters, &kcorr, seed).unwrap();
            let brute = brute_pipeline(&cat.galaxies, &geo, &kcorr, &params).unwrap();
            let fast = run_sequential(&cat.galaxies, &geo, &kcorr, &params, &zcfg).unwrap();
            assert_eq!(brute.candidates, fast.candidates, "seed {seed}");
            assert_eq!(brute.clusters, fast.clusters, "seed {seed}");
            assert_eq!(brute.members, fast.members, "seed {seed}");
        }
    }
}
