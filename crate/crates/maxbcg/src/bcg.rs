//! MaxBCG science core: per-galaxy chi-squared likelihood against the
//! redshift lookup table, neighbor-weighted likelihood maximization,
//! cluster-center selection, and member retrieval.

use crate::catalog::{BCGParams, Galaxy, KCorrEntry, KCorrTable};
use crate::zone::ZoneTable;
use anyhow::Result;
use std::collections::HashMap;

/// A galaxy that survived both likelihood stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub objid: u64,
    pub ra: f64,
    pub dec: f64,
    /// Estimated redshift (one of the k-table entries).
    pub z: f64,
    pub i: f64,
    /// Member count: neighbors at the chosen redshift plus the candidate.
    pub ngal: u32,
    /// Weighted likelihood ln(neighbors+1) - chisq; higher is better.
    pub chi2: f64,
}

/// A candidate that is the likelihood maximum of its neighborhood.
pub type Cluster = Candidate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterMember {
    pub cluster_objid: u64,
    pub galaxy_objid: u64,
    pub distance: f64,
}

/// One redshift at which a galaxy passed the chi-squared filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedshiftScore {
    pub zid: u32,
    pub z: f64,
    pub chisq: f64,
    pub ngal: u32,
}

/// Unweighted likelihood of `g` being a BCG at the redshift of `k`.
pub fn chi_square(g: &Galaxy, k: &KCorrEntry, p: &BCGParams) -> f64 {
    (g.i - k.i).powi(2) / p.mag_dispersion.powi(2)
        + (g.gr - k.gr).powi(2) / (g.sigmagr.powi(2) + p.gr_pop_sigma.powi(2))
        + (g.ri - k.ri).powi(2) / (g.sigmari.powi(2) + p.ri_pop_sigma.powi(2))
}

/// Redshifts at which `g` has even a remote chance of being a BCG
/// (chi-squared strictly below the threshold).
pub fn filter_redshifts(g: &Galaxy, kcorr: &KCorrTable, p: &BCGParams) -> Vec<RedshiftScore> {
    kcorr
        .entries
        .iter()
        .filter_map(|k| {
            let chisq = chi_square(g, k, p);
            (chisq < p.chisq_threshold).then_some(RedshiftScore { zid: k.zid, z: k.z, chisq, ngal: 0 })
        })
        .collect()
}

/// Search radius and magnitude/color windows spanning the passing redshifts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow {
    pub rad: f64,
    pub imin: f64,
    pub imax: f64,
    pub grmin: f64,
    pub grmax: f64,
    pub rimin: f64,
    pub rimax: f64,
}

/// Window values over the k-entries of the passing redshifts. Neighbors
/// must be no brighter than the candidate, so `imin` is its own magnitude.
pub fn search_window(
    scores: &[RedshiftScore],
    kcorr: &KCorrTable,
    g_i: f64,
    p: &BCGParams,
) -> SearchWindow {
    debug_assert!(!scores.is_empty());
    let mut rad = f64::NEG_INFINITY;
    let mut imax = f64::NEG_INFINITY;
    let mut grmin = f64::INFINITY;
    let mut grmax = f64::NEG_INFINITY;
    let mut rimin = f64::INFINITY;
    let mut rimax = f64::NEG_INFINITY;
    for s in scores {
        let k = &kcorr.entries[(s.zid - 1) as usize];
        rad = rad.max(k.radius);
        imax = imax.max(k.ilim);
        grmin = grmin.min(k.gr);
        grmax = grmax.max(k.gr);
        rimin = rimin.min(k.ri);
        rimax = rimax.max(k.ri);
    }
    SearchWindow {
        rad,
        imin: g_i,
        imax,
        grmin: grmin - 2.0 * p.gr_pop_sigma,
        grmax: grmax + 2.0 * p.gr_pop_sigma,
        rimin: rimin - 2.0 * p.ri_pop_sigma,
        rimax: rimax + 2.0 * p.ri_pop_sigma,
    }
}

/// A neighbor surviving the window prefilter.
struct Friend {
    distance: f64,
    i: f64,
    gr: f64,
    ri: f64,
}

/// Full per-galaxy pipeline: filter, neighbor count per redshift, weighted
/// maximum. Returns None when no redshift passes or no passing redshift
/// has at least one neighbor. On a likelihood tie within `chi_select_tol`
/// the smallest zid wins.
pub fn bcg_candidate(
    g: &Galaxy,
    zones: &ZoneTable,
    galaxies: &HashMap<u64, Galaxy>,
    kcorr: &KCorrTable,
    p: &BCGParams,
) -> Option<Candidate> {
    let mut scores = filter_redshifts(g, kcorr, p);
    if scores.is_empty() {
        return None;
    }
    let w = search_window(&scores, kcorr, g.i, p);

    let friends: Vec<Friend> = zones
        .neighbors(g.ra, g.dec, w.rad)
        .into_iter()
        .filter(|h| h.objid != g.objid)
        .filter_map(|h| {
            let f = galaxies.get(&h.objid)?;
            (f.i >= w.imin
                && f.i <= w.imax
                && f.gr >= w.grmin
                && f.gr <= w.grmax
                && f.ri >= w.rimin
                && f.ri <= w.rimax)
                .then_some(Friend { distance: h.distance, i: f.i, gr: f.gr, ri: f.ri })
        })
        .collect();

    for s in scores.iter_mut() {
        let k = &kcorr.entries[(s.zid - 1) as usize];
        s.ngal = friends
            .iter()
            .filter(|f| {
                f.distance < k.radius
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
    // scores are in ascending zid order; first within tolerance wins
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

/// ln(neighbors + 1) - chisq.
pub fn weighted_likelihood(ngal: u32, chisq: f64) -> f64 {
    ((ngal + 1) as f64).ln() - chisq
}

/// R200 radius in Mpc for a cluster of `ngal` galaxies.
pub fn r200(ngal: f64) -> f64 {
    0.17 * ngal.powf(0.51)
}

/// Whether `c` holds the maximum likelihood among candidates within the
/// 1 Mpc angular radius at its redshift and inside the redshift window.
/// The candidate set must be complete and frozen before any call.
pub fn is_cluster(
    c: &Candidate,
    candidate_zones: &ZoneTable,
    candidates: &HashMap<u64, Candidate>,
    kcorr: &KCorrTable,
    p: &BCGParams,
) -> Result<bool> {
    let k = kcorr.lookup_z(c.z)?;
    let best = candidate_zones
        .neighbors(c.ra, c.dec, k.radius)
        .into_iter()
        .filter_map(|h| candidates.get(&h.objid))
        .filter(|n| n.z >= c.z - p.z_window && n.z <= c.z + p.z_window)
        .map(|n| n.chi2)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((best - c.chi2).abs() < p.chi_tie_tol)
}

/// Galaxies belonging to a cluster: the BCG itself at distance 0, plus
/// every galaxy inside the r200-scaled 1 Mpc radius with magnitude and
/// colors inside the expected windows at the cluster redshift.
pub fn cluster_members(
    cl: &Cluster,
    zones: &ZoneTable,
    galaxies: &HashMap<u64, Galaxy>,
    kcorr: &KCorrTable,
    p: &BCGParams,
) -> Result<Vec<ClusterMember>> {
    let k = kcorr.lookup_z(cl.z)?;
    let rad = k.radius * r200(cl.ngal as f64);
    let mut members =
        vec![ClusterMember { cluster_objid: cl.objid, galaxy_objid: cl.objid, distance: 0.0 }];
    for h in zones.neighbors(cl.ra, cl.dec, rad) {
        if h.objid == cl.objid {
            continue;
        }
        let Some(g) = galaxies.get(&h.objid) else { continue };
        if h.distance < rad
            && g.i >= cl.i - p.member_mag_slack
            && g.i <= k.ilim
            && g.gr >= k.gr - p.gr_pop_sigma
            && g.gr <= k.gr + p.gr_pop_sigma
            && g.ri >= k.ri - p.ri_pop_sigma
            && g.ri <= k.ri + p.ri_pop_sigma
        {
            members.push(ClusterMember {
                cluster_objid: cl.objid,
                galaxy_objid: h.objid,
                distance: h.distance,
            });
        }
    }
    Ok(members)
}
