//! Declination-slab partitioning and pipeline execution.
//!
//! A run over a target region T evaluates candidacy over T plus one
//! buffer width (area B) using data from B plus one more buffer width
//! (area P). Partitioned execution cuts T's dec range at zone boundaries
//! into slabs, gives each slab its own buffered copy of the data, runs the
//! identical slab pipeline concurrently, and merges by concatenation:
//! ownership intervals are disjoint, so the merged output matches the
//! sequential run bitwise.

use crate::bcg::{self, Candidate, Cluster, ClusterMember};
use crate::catalog::{BCGParams, Galaxy, KCorrTable, RegionBounds};
use crate::zone::{zone_of, ZoneConfig, ZoneTable};
use anyhow::{bail, Result};
use rayon::prelude::*;
use std::collections::HashMap;
use std::time::Instant;

/// Target / candidate / data areas of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunGeometry {
    pub target: RegionBounds,
    pub candidate_area: RegionBounds,
    pub data_area: RegionBounds,
    pub buffer_width: f64,
}

impl RunGeometry {
    pub fn new(target: RegionBounds, buffer_width: f64) -> Result<Self> {
        if buffer_width <= 0.0 {
            bail!("buffer width must be positive");
        }
        target.validate()?;
        let candidate_area = target.expand(buffer_width);
        let data_area = candidate_area.expand(buffer_width);
        candidate_area.validate()?;
        data_area.validate()?;
        Ok(RunGeometry { target, candidate_area, data_area, buffer_width })
    }
}

/// Half-open dec interval `[lo, hi)`; the topmost slab closes at `hi` so
/// the slabs cover the closed run bounds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecInterval {
    pub lo: f64,
    pub hi: f64,
    pub closed_top: bool,
}

impl DecInterval {
    pub fn contains(&self, dec: f64) -> bool {
        dec >= self.lo && (dec < self.hi || (self.closed_top && dec == self.hi))
    }

    fn everything() -> DecInterval {
        DecInterval { lo: -90.5, hi: 90.5, closed_top: true }
    }
}

/// One slab of a partitioned run.
///
/// Candidacy is *computed* one buffer width beyond the owned target slab
/// (overlapping adjacent slabs) so cluster screening sees every neighbor
/// candidate with its exact likelihood, but each candidate is *emitted*
/// by exactly one partition: ownership intervals tile B without overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partition {
    /// Dec slab of T this partition emits clusters for.
    pub owned_target: DecInterval,
    /// Dec slab of B this partition emits candidates for.
    pub owned_candidate: DecInterval,
    /// Dec slab of B this partition evaluates candidacy over
    /// (owned_target expanded by one buffer width, clipped to B).
    pub compute_candidate: DecInterval,
    /// Dec slab of P this partition loads (compute_candidate expanded by
    /// one buffer width, clipped to P; overlaps adjacent slabs).
    pub loaded_data: DecInterval,
    pub estimated_load: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub parts: Vec<Partition>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseMetrics {
    pub wall_s: f64,
    pub items: u64,
}

/// Per-phase timings and work counters, one set per executed slab.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunMetrics {
    /// Galaxies bucketed into zones.
    pub zone_build: PhaseMetrics,
    /// Galaxies evaluated for candidacy.
    pub candidate: PhaseMetrics,
    /// Candidates screened as cluster centers.
    pub cluster: PhaseMetrics,
    /// Clusters whose members were retrieved.
    pub members: PhaseMetrics,
}

impl RunMetrics {
    pub fn total_wall_s(&self) -> f64 {
        self.zone_build.wall_s + self.candidate.wall_s + self.cluster.wall_s + self.members.wall_s
    }

    pub fn total_work(&self) -> u64 {
        self.zone_build.items + self.candidate.items + self.cluster.items + self.members.items
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub candidates: Vec<Candidate>,
    pub clusters: Vec<Cluster>,
    pub members: Vec<ClusterMember>,
    /// One entry per executed slab (a single entry for sequential runs).
    pub partition_metrics: Vec<RunMetrics>,
}

impl RunResult {
    pub fn total_work(&self) -> u64 {
        self.partition_metrics.iter().map(RunMetrics::total_work).sum()
    }
}

/// Cuts T's dec range at zone boundaries into `n` slabs, balancing galaxy
/// counts with a greedy sweep, then derives the buffered candidate and
/// data intervals for each slab.
pub fn plan_partitions(
    galaxies: &[Galaxy],
    geometry: &RunGeometry,
    zone_config: &ZoneConfig,
    kcorr: &KCorrTable,
    n: usize,
) -> Result<PartitionPlan> {
    if n < 1 {
        bail!("partition count must be at least 1");
    }
    if geometry.buffer_width < kcorr.max_radius {
        bail!(
            "buffer width {} is smaller than the maximum search radius {}",
            geometry.buffer_width,
            kcorr.max_radius
        );
    }
    let t = &geometry.target;
    let h = zone_config.zone_height;
    let z_lo = zone_of(t.min_dec, zone_config);
    let z_hi = zone_of(t.max_dec, zone_config);

    let mut counts: HashMap<i32, usize> = HashMap::new();
    for g in galaxies {
        if t.contains(g.ra, g.dec) {
            *counts.entry(zone_of(g.dec, zone_config)).or_default() += 1;
        }
    }
    let nonempty = counts.len();
    if n > nonempty.max(usize::from(n == 1)) {
        bail!("cannot split {} nonempty zones into {} partitions", nonempty, n);
    }
    let total: usize = counts.values().sum();

    // Greedy sweep: cut after the zone where the cumulative count reaches
    // the next i/n share, at most one cut per zone boundary.
    let mut cuts: Vec<f64> = Vec::with_capacity(n - 1);
    let mut cum = 0usize;
    for z in z_lo..=z_hi {
        if cuts.len() == n - 1 {
            break;
        }
        cum += counts.get(&z).copied().unwrap_or(0);
        let next = cuts.len() + 1;
        let remaining_zones = (z_hi - z) as usize;
        let need_cut = cum * n >= total * next;
        let forced = remaining_zones == n - 1 - cuts.len();
        if (need_cut || forced) && z < z_hi {
            cuts.push((z + 1) as f64 * h - 90.0);
        }
    }
    if cuts.len() != n - 1 {
        bail!("could not place {} cuts across zones {}..{}", n - 1, z_lo, z_hi);
    }

    let b = &geometry.candidate_area;
    let p = &geometry.data_area;
    let buf = geometry.buffer_width;
    let mut parts = Vec::with_capacity(n);
    for j in 0..n {
        let last = j == n - 1;
        let owned_target = DecInterval {
            lo: if j == 0 { t.min_dec } else { cuts[j - 1] },
            hi: if last { t.max_dec } else { cuts[j] },
            closed_top: last,
        };
        let owned_candidate = DecInterval {
            lo: if j == 0 { b.min_dec } else { cuts[j - 1] },
            hi: if last { b.max_dec } else { cuts[j] },
            closed_top: last,
        };
        let compute_candidate = DecInterval {
            lo: (owned_target.lo - buf).max(b.min_dec),
            hi: (owned_target.hi + buf).min(b.max_dec),
            closed_top: true,
        };
        let loaded_data = DecInterval {
            lo: (compute_candidate.lo - buf).max(p.min_dec),
            hi: (compute_candidate.hi + buf).min(p.max_dec),
            closed_top: true,
        };
        let estimated_load = galaxies
            .iter()
            .filter(|g| p.contains(g.ra, g.dec) && loaded_data.contains(g.dec))
            .count();
        parts.push(Partition {
            owned_target,
            owned_candidate,
            compute_candidate,
            loaded_data,
            estimated_load,
        });
    }
    Ok(PartitionPlan { parts })
}

/// The pipeline over one slab. The sequential run is the degenerate slab
/// covering everything, so both execution modes share this code path.
fn run_slab(
    galaxies: &[Galaxy],
    geometry: &RunGeometry,
    kcorr: &KCorrTable,
    params: &BCGParams,
    zone_config: &ZoneConfig,
    data_iv: &DecInterval,
    candidate_iv: &DecInterval,
    target_iv: &DecInterval,
) -> Result<RunResult> {
    let mut metrics = RunMetrics::default();

    // Phase 1: load and zone
    let t0 = Instant::now();
    let loaded: Vec<&Galaxy> = galaxies
        .iter()
        .filter(|g| geometry.data_area.contains(g.ra, g.dec) && data_iv.contains(g.dec))
        .collect();
    let zones = ZoneTable::build(loaded.iter().map(|g| (g.objid, g.ra, g.dec)), *zone_config);
    let galaxy_map: HashMap<u64, Galaxy> = loaded.iter().map(|g| (g.objid, **g)).collect();
    metrics.zone_build = PhaseMetrics { wall_s: t0.elapsed().as_secs_f64(), items: loaded.len() as u64 };

    // Phase 2: candidacy over the owned slab of B
    let t0 = Instant::now();
    let mut evaluated = 0u64;
    let mut candidates: Vec<Candidate> = Vec::new();
    for g in &loaded {
        if !(geometry.candidate_area.contains(g.ra, g.dec) && candidate_iv.contains(g.dec)) {
            continue;
        }
        evaluated += 1;
        if let Some(c) = bcg::bcg_candidate(g, &zones, &galaxy_map, kcorr, params) {
            candidates.push(c);
        }
    }
    candidates.sort_by_key(|c| c.objid);
    metrics.candidate = PhaseMetrics { wall_s: t0.elapsed().as_secs_f64(), items: evaluated };

    // Phase 3: cluster screening over the owned slab of T, against the
    // complete (frozen) candidate set of this slab
    let t0 = Instant::now();
    let cand_zones =
        ZoneTable::build(candidates.iter().map(|c| (c.objid, c.ra, c.dec)), *zone_config);
    let cand_map: HashMap<u64, Candidate> = candidates.iter().map(|c| (c.objid, *c)).collect();
    let mut checks = 0u64;
    let mut clusters: Vec<Cluster> = Vec::new();
    for c in &candidates {
        if !(geometry.target.contains(c.ra, c.dec) && target_iv.contains(c.dec)) {
            continue;
        }
        checks += 1;
        if bcg::is_cluster(c, &cand_zones, &cand_map, kcorr, params)? {
            clusters.push(*c);
        }
    }
    metrics.cluster = PhaseMetrics { wall_s: t0.elapsed().as_secs_f64(), items: checks };

    // Phase 4: member retrieval
    let t0 = Instant::now();
    let mut members: Vec<ClusterMember> = Vec::new();
    for cl in &clusters {
        members.extend(bcg::cluster_members(cl, &zones, &galaxy_map, kcorr, params)?);
    }
    members.sort_by_key(|m| (m.cluster_objid, m.galaxy_objid));
    metrics.members =
        PhaseMetrics { wall_s: t0.elapsed().as_secs_f64(), items: clusters.len() as u64 };

    Ok(RunResult { candidates, clusters, members, partition_metrics: vec![metrics] })
}

/// One-slab run over the full geometry.
pub fn run_sequential(
    galaxies: &[Galaxy],
    geometry: &RunGeometry,
    kcorr: &KCorrTable,
    params: &BCGParams,
    zone_config: &ZoneConfig,
) -> Result<RunResult> {
    if geometry.buffer_width < kcorr.max_radius {
        bail!(
            "buffer width {} is smaller than the maximum search radius {}",
            geometry.buffer_width,
            kcorr.max_radius
        );
    }
    let all = DecInterval::everything();
    run_slab(galaxies, geometry, kcorr, params, zone_config, &all, &all, &all)
}

/// Runs `n` independent slabs concurrently (at most `threads` at a time)
/// and merges by concatenation and sort. Ownership intervals are disjoint,
/// so no dedup is needed and the merge is independent of completion order.
pub fn run_partitioned(
    galaxies: &[Galaxy],
    geometry: &RunGeometry,
    kcorr: &KCorrTable,
    params: &BCGParams,
    zone_config: &ZoneConfig,
    n: usize,
    threads: usize,
) -> Result<RunResult> {
    let plan = plan_partitions(galaxies, geometry, zone_config, kcorr, n)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1).min(n))
        .build()?;
    let slab_results: Vec<RunResult> = pool.install(|| {
        plan.parts
            .par_iter()
            .map(|part| {
                run_slab(
                    galaxies,
                    geometry,
                    kcorr,
                    params,
                    zone_config,
                    &part.loaded_data,
                    &part.compute_candidate,
                    &part.owned_target,
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut merged = RunResult {
        candidates: Vec::new(),
        clusters: Vec::new(),
        members: Vec::new(),
        partition_metrics: Vec::new(),
    };
    for (part, r) in plan.parts.iter().zip(slab_results) {
        // emit each candidate from the one partition that owns its dec
        merged
            .candidates
            .extend(r.candidates.into_iter().filter(|c| part.owned_candidate.contains(c.dec)));
        merged.clusters.extend(r.clusters);
        merged.members.extend(r.members);
        merged.partition_metrics.extend(r.partition_metrics);
    }
    merged.candidates.sort_by_key(|c| c.objid);
    merged.clusters.sort_by_key(|c| c.objid);
    merged.members.sort_by_key(|m| (m.cluster_objid, m.galaxy_objid));
    Ok(merged)
}
