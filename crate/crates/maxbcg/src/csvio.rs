//! CSV readers and writers for every file the pipeline touches.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every 64-bit value exactly and identical
//! runs produce byte-identical files.

use crate::bcg::{Candidate, ClusterMember};
use crate::catalog::{self, Galaxy, KCorrTable, RegionBounds};
use crate::partition::{RunMetrics, RunResult};
use anyhow::{bail, Context, Result};
use std::collections::HashSet;
use std::io::{Read, Write};

pub const RAW_GALAXY_HEADER: &str = "objid,ra,dec,dered_g,dered_r,dered_i";
pub const DERIVED_GALAXY_HEADER: &str = "objid,ra,dec,i,gr,ri,sigmagr,sigmari";
pub const KCORR_HEADER: &str = "zid,z,i,ilim,ug,gr,ri,iz,radius";
pub const CANDIDATE_HEADER: &str = "objid,ra,dec,z,i,ngal,chi2";
pub const MEMBER_HEADER: &str = "clusterObjID,galaxyObjID,distance";

pub fn write_galaxies<W: Write>(mut w: W, galaxies: &[Galaxy]) -> Result<()> {
    writeln!(w, "{DERIVED_GALAXY_HEADER}")?;
    for g in galaxies {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            g.objid, g.ra, g.dec, g.i, g.gr, g.ri, g.sigmagr, g.sigmari
        )?;
    }
    Ok(())
}

pub fn read_galaxies_derived<R: Read>(source: R) -> Result<Vec<Galaxy>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, name: &str| -> Result<f64> {
            record
                .get(idx)
                .with_context(|| format!("line {line}: missing column {name}"))?
                .trim()
                .parse::<f64>()
                .with_context(|| format!("line {line}: bad {name} value"))
        };
        let objid: u64 = record
            .get(0)
            .with_context(|| format!("line {line}: missing objid"))?
            .trim()
            .parse()
            .with_context(|| format!("line {line}: bad objid"))?;
        if !seen.insert(objid) {
            bail!("line {line}: duplicate objid {objid}");
        }
        out.push(Galaxy {
            objid,
            ra: field(1, "ra")?,
            dec: field(2, "dec")?,
            i: field(3, "i")?,
            gr: field(4, "gr")?,
            ri: field(5, "ri")?,
            sigmagr: field(6, "sigmagr")?,
            sigmari: field(7, "sigmari")?,
        });
    }
    Ok(out)
}

/// Reads a galaxy CSV in either the raw or the derived schema, sniffing
/// the header line. Raw rows are ingested over the full sky.
pub fn read_galaxies_auto(content: &str) -> Result<Vec<Galaxy>> {
    let header = content.lines().next().unwrap_or("").trim();
    if header == RAW_GALAXY_HEADER {
        let sky = RegionBounds::new(0.0, 360.0, -90.0, 90.0)?;
        catalog::ingest_galaxies(content.as_bytes(), &sky)
    } else if header == DERIVED_GALAXY_HEADER {
        read_galaxies_derived(content.as_bytes())
    } else {
        bail!("unrecognized galaxy CSV header: {header:?}");
    }
}

pub fn write_kcorr<W: Write>(mut w: W, table: &KCorrTable) -> Result<()> {
    writeln!(w, "{KCORR_HEADER}")?;
    for e in &table.entries {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            e.zid, e.z, e.i, e.ilim, e.ug, e.gr, e.ri, e.iz, e.radius
        )?;
    }
    Ok(())
}

/// Candidates and clusters share one schema.
pub fn write_candidates<W: Write>(mut w: W, candidates: &[Candidate]) -> Result<()> {
    writeln!(w, "{CANDIDATE_HEADER}")?;
    for c in candidates {
        writeln!(w, "{},{},{},{},{},{},{}", c.objid, c.ra, c.dec, c.z, c.i, c.ngal, c.chi2)?;
    }
    Ok(())
}

pub fn read_candidates<R: Read>(source: R) -> Result<Vec<Candidate>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |idx: usize| -> Result<&str> {
            record.get(idx).with_context(|| format!("line {line}: short row"))
        };
        out.push(Candidate {
            objid: get(0)?.parse().with_context(|| format!("line {line}: bad objid"))?,
            ra: get(1)?.parse()?,
            dec: get(2)?.parse()?,
            z: get(3)?.parse()?,
            i: get(4)?.parse()?,
            ngal: get(5)?.parse()?,
            chi2: get(6)?.parse()?,
        });
    }
    Ok(out)
}

pub fn write_members<W: Write>(mut w: W, members: &[ClusterMember]) -> Result<()> {
    writeln!(w, "{MEMBER_HEADER}")?;
    for m in members {
        writeln!(w, "{},{},{}", m.cluster_objid, m.galaxy_objid, m.distance)?;
    }
    Ok(())
}

/// Plain-text metrics report: one block per partition plus totals, with
/// one row per pipeline phase.
pub fn write_metrics<W: Write>(mut w: W, result: &RunResult) -> Result<()> {
    let row = |w: &mut W, task: &str, m: &crate::partition::PhaseMetrics| -> Result<()> {
        writeln!(w, "  {task:<16} elapsed_s {:>10.3}  items {:>10}", m.wall_s, m.items)?;
        Ok(())
    };
    for (idx, m) in result.partition_metrics.iter().enumerate() {
        writeln!(w, "partition {}", idx + 1)?;
        row(&mut w, "zone build", &m.zone_build)?;
        row(&mut w, "candidate phase", &m.candidate)?;
        row(&mut w, "cluster phase", &m.cluster)?;
        row(&mut w, "member phase", &m.members)?;
        writeln!(
            w,
            "  {:<16} elapsed_s {:>10.3}  items {:>10}",
            "total",
            m.total_wall_s(),
            m.total_work()
        )?;
    }
    writeln!(
        w,
        "overall: partitions {}  total_work {}  candidates {}  clusters {}  members {}",
        result.partition_metrics.len(),
        result.total_work(),
        result.candidates.len(),
        result.clusters.len(),
        result.members.len()
    )?;
    Ok(())
}

fn all_metrics(result: &RunResult) -> RunMetrics {
    let mut total = RunMetrics::default();
    for m in &result.partition_metrics {
        total.zone_build.wall_s += m.zone_build.wall_s;
        total.zone_build.items += m.zone_build.items;
        total.candidate.wall_s += m.candidate.wall_s;
        total.candidate.items += m.candidate.items;
        total.cluster.wall_s += m.cluster.wall_s;
        total.cluster.items += m.cluster.items;
        total.members.wall_s += m.members.wall_s;
        total.members.items += m.members.items;
    }
    total
}

/// One bench table line per partition count, plus a ratio line comparing
/// each run against the first.
pub fn write_bench_report<W: Write>(mut w: W, runs: &[(usize, f64, RunResult)]) -> Result<()> {
    writeln!(
        w,
        "{:>10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "partitions", "wall_s", "zone_items", "cand_evals", "clu_checks", "total_work", "clusters"
    )?;
    for (n, wall, r) in runs {
        let t = all_metrics(r);
        writeln!(
            w,
            "{:>10} {:>12.3} {:>12} {:>12} {:>12} {:>12} {:>12}",
            n,
            wall,
            t.zone_build.items,
            t.candidate.items,
            t.cluster.items,
            r.total_work(),
            r.clusters.len()
        )?;
    }
    if let Some((n0, wall0, r0)) = runs.first() {
        for (n, wall, r) in runs {
            writeln!(
                w,
                "ratio {}node/{}node: wall {:.0}%  work {:.0}%",
                n,
                n0,
                100.0 * wall / wall0,
                100.0 * r.total_work() as f64 / r0.total_work() as f64
            )?;
        }
    }
    Ok(())
}
