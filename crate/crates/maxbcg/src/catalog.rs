//! Domain types and catalog construction: raw-catalog ingestion, redshift
//! lookup tables, and the synthetic generator used for desk-scale runs.

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::io::Read;

/// Redshift lookup tolerance, matching the reference predicate `< 0.0000001`.
pub const Z_LOOKUP_TOL: f64 = 1e-7;

/// One raw catalog row: position plus dereddened g, r, i magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawGalaxy {
    pub objid: u64,
    pub ra: f64,
    pub dec: f64,
    pub g: f64,
    pub r: f64,
    pub i: f64,
}

/// A catalog object with derived colors and color errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Galaxy {
    pub objid: u64,
    pub ra: f64,
    pub dec: f64,
    pub i: f64,
    pub gr: f64,
    pub ri: f64,
    pub sigmagr: f64,
    pub sigmari: f64,
}

/// Expected BCG properties at one redshift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KCorrEntry {
    /// 1-based row index.
    pub zid: u32,
    pub z: f64,
    /// Expected BCG i magnitude at z.
    pub i: f64,
    /// Limiting i magnitude at z.
    pub ilim: f64,
    pub ug: f64,
    pub gr: f64,
    pub ri: f64,
    pub iz: f64,
    /// Angular size of 1 Mpc at z, degrees.
    pub radius: f64,
}

/// Redshift lookup table, ordered by strictly increasing z.
#[derive(Debug, Clone, PartialEq)]
pub struct KCorrTable {
    pub entries: Vec<KCorrEntry>,
    pub max_radius: f64,
}

impl KCorrTable {
    /// Validates the entry invariants: z strictly increasing, radius
    /// positive and non-increasing (the synthetic generator's low-z cap
    /// produces a plateau, so strict decrease is not required).
    pub fn from_entries(entries: Vec<KCorrEntry>) -> Result<Self> {
        let mut max_radius = 0.0f64;
        for (idx, e) in entries.iter().enumerate() {
            if e.radius <= 0.0 {
                bail!("kcorr row {}: radius {} is not positive", idx + 1, e.radius);
            }
            if idx > 0 {
                let prev = &entries[idx - 1];
                if e.z <= prev.z {
                    bail!("kcorr row {}: z {} does not increase from {}", idx + 1, e.z, prev.z);
                }
                if e.radius > prev.radius {
                    bail!(
                        "kcorr row {}: radius {} increases from {}",
                        idx + 1,
                        e.radius,
                        prev.radius
                    );
                }
            }
            max_radius = max_radius.max(e.radius);
        }
        Ok(KCorrTable { entries, max_radius })
    }

    /// Finds the entry whose z matches within [`Z_LOOKUP_TOL`].
    pub fn lookup_z(&self, z: f64) -> Result<&KCorrEntry> {
        self.entries
            .iter()
            .find(|e| (e.z - z).abs() < Z_LOOKUP_TOL)
            .with_context(|| format!("no k-correction entry matches z = {z}"))
    }

    /// Entry with z nearest to the requested value (used when planting
    /// synthetic clusters at a nominal redshift).
    pub fn nearest_z(&self, z: f64) -> Result<&KCorrEntry> {
        self.entries
            .iter()
            .min_by(|a, b| {
                (a.z - z).abs().partial_cmp(&(b.z - z).abs()).unwrap()
            })
            .context("empty k-correction table")
    }
}

/// Per-run algorithm constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BCGParams {
    /// Population dispersion of BCG magnitudes.
    pub mag_dispersion: f64,
    pub gr_pop_sigma: f64,
    pub ri_pop_sigma: f64,
    pub chisq_threshold: f64,
    /// Redshift window for the cluster-center comparison.
    pub z_window: f64,
    /// Likelihood tolerance deciding whether a candidate is its
    /// neighborhood's maximum.
    pub chi_tie_tol: f64,
    /// Tolerance for picking the best redshift of a candidate.
    pub chi_select_tol: f64,
    /// Magnitude slack below the BCG when collecting members.
    pub member_mag_slack: f64,
}

impl Default for BCGParams {
    fn default() -> Self {
        BCGParams {
            mag_dispersion: 0.57,
            gr_pop_sigma: 0.05,
            ri_pop_sigma: 0.06,
            chisq_threshold: 7.0,
            z_window: 0.05,
            chi_tie_tol: 1e-5,
            chi_select_tol: 1e-8,
            member_mag_slack: 0.001,
        }
    }
}

/// Closed ra/dec rectangle. Must not cross ra = 0/360.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionBounds {
    pub min_ra: f64,
    pub max_ra: f64,
    pub min_dec: f64,
    pub max_dec: f64,
}

impl RegionBounds {
    pub fn new(min_ra: f64, max_ra: f64, min_dec: f64, max_dec: f64) -> Result<Self> {
        let r = RegionBounds { min_ra, max_ra, min_dec, max_dec };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_ra < self.max_ra) {
            bail!("region: min_ra {} must be < max_ra {}", self.min_ra, self.max_ra);
        }
        if !(self.min_dec < self.max_dec) {
            bail!("region: min_dec {} must be < max_dec {}", self.min_dec, self.max_dec);
        }
        if self.min_ra < 0.0 || self.max_ra > 360.0 {
            bail!("region: ra interval [{}, {}] crosses 0/360", self.min_ra, self.max_ra);
        }
        if self.min_dec < -90.0 || self.max_dec > 90.0 {
            bail!("region: dec interval [{}, {}] outside [-90, 90]", self.min_dec, self.max_dec);
        }
        Ok(())
    }

    /// Closed-interval membership, matching SQL BETWEEN.
    pub fn contains(&self, ra: f64, dec: f64) -> bool {
        ra >= self.min_ra && ra <= self.max_ra && dec >= self.min_dec && dec <= self.max_dec
    }

    /// Expands all four sides by `margin` degrees.
    pub fn expand(&self, margin: f64) -> RegionBounds {
        RegionBounds {
            min_ra: self.min_ra - margin,
            max_ra: self.max_ra + margin,
            min_dec: self.min_dec - margin,
            max_dec: self.max_dec + margin,
        }
    }
}

/// Derives colors and color errors from raw magnitudes.
///
/// The error formulas are the reference power laws
/// `2.089 * 10^(0.228*i - 6)` and `4.266 * 10^(0.206*i - 6)`.
pub fn derive_galaxy(raw: &RawGalaxy) -> Galaxy {
    Galaxy {
        objid: raw.objid,
        ra: raw.ra,
        dec: raw.dec,
        i: raw.i,
        gr: raw.g - raw.r,
        ri: raw.r - raw.i,
        sigmagr: 2.089 * 10f64.powf(0.228 * raw.i - 6.0),
        sigmari: 4.266 * 10f64.powf(0.206 * raw.i - 6.0),
    }
}

/// Reads a raw-catalog CSV stream (`objid,ra,dec,dered_g,dered_r,dered_i`)
/// and returns the derived galaxies inside the closed region bounds.
pub fn ingest_galaxies<R: Read>(source: R, region: &RegionBounds) -> Result<Vec<Galaxy>> {
    region.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse = |idx: usize, name: &str| -> Result<f64> {
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
        let raw = RawGalaxy {
            objid,
            ra: parse(1, "ra")?,
            dec: parse(2, "dec")?,
            g: parse(3, "dered_g")?,
            r: parse(4, "dered_r")?,
            i: parse(5, "dered_i")?,
        };
        if !region.contains(raw.ra, raw.dec) {
            continue;
        }
        if !seen.insert(raw.objid) {
            bail!("line {line}: duplicate objid {objid}");
        }
        out.push(derive_galaxy(&raw));
    }
    Ok(out)
}

/// Parses a k-correction CSV stream
/// (`zid,z,i,ilim,ug,gr,ri,iz,radius`), validating monotonicity.
pub fn load_kcorr<R: Read>(source: R) -> Result<KCorrTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let mut entries = Vec::new();
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
        entries.push(KCorrEntry {
            zid: record
                .get(0)
                .with_context(|| format!("line {line}: missing zid"))?
                .trim()
                .parse()
                .with_context(|| format!("line {line}: bad zid"))?,
            z: field(1, "z")?,
            i: field(2, "i")?,
            ilim: field(3, "ilim")?,
            ug: field(4, "ug")?,
            gr: field(5, "gr")?,
            ri: field(6, "ri")?,
            iz: field(7, "iz")?,
            radius: field(8, "radius")?,
        });
    }
    KCorrTable::from_entries(entries)
}

/// Angular-scale coefficient of the synthetic table: 1 Mpc subtends
/// 0.74/1.78 deg at z = 0.05, so radius(z) = (0.05 * 0.74/1.78) / z.
const SYNTH_RADIUS_COEFF: f64 = 0.05 * (0.74 / 1.78);

/// Builds a synthetic redshift lookup table with steps of 0.001.
///
/// Magnitudes and colors are smooth monotone functions of z; the angular
/// radius follows 1/z, capped at `radius_cap` for low z.
pub fn generate_synthetic_kcorr(steps: u32, radius_cap: f64) -> Result<KCorrTable> {
    if steps < 2 {
        bail!("synthetic kcorr needs at least 2 steps");
    }
    if radius_cap <= 0.0 {
        bail!("radius_cap must be positive");
    }
    let mut entries = Vec::with_capacity(steps as usize);
    for k in 1..=steps {
        let z = k as f64 * 0.001;
        let i = 13.0 + 8.0 * (1.0 + 20.0 * z).ln();
        entries.push(KCorrEntry {
            zid: k,
            z,
            i,
            ilim: i + 1.0,
            ug: 1.5 + z,
            gr: 0.8 + 0.9 * z,
            ri: 0.35 + 0.5 * z,
            iz: 0.3 + 0.2 * z,
            radius: radius_cap.min(SYNTH_RADIUS_COEFF / z),
        });
    }
    KCorrTable::from_entries(entries)
}

/// A cluster to plant in the synthetic catalog.
#[derive(Debug, Clone, Copy)]
pub struct PlantedCluster {
    pub ra: f64,
    pub dec: f64,
    pub z: f64,
    /// Member galaxies around the BCG (not counting the BCG).
    pub members: usize,
}

/// Record of where a planted cluster ended up in the generated catalog.
#[derive(Debug, Clone)]
pub struct PlantedRecord {
    pub bcg_objid: u64,
    pub member_objids: Vec<u64>,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticCatalog {
    pub galaxies: Vec<Galaxy>,
    pub planted: Vec<PlantedRecord>,
}

fn sigma_pair(i: f64) -> (f64, f64) {
    (
        2.089 * 10f64.powf(0.228 * i - 6.0),
        4.266 * 10f64.powf(0.206 * i - 6.0),
    )
}

/// Generates a deterministic synthetic catalog: planted clusters first
/// (BCG matching its k-entry exactly, members inside the retrieval radius
/// and inside all counting windows), then `n_field` uniform field galaxies.
pub fn generate_synthetic_catalog(
    region: &RegionBounds,
    n_field: usize,
    clusters: &[PlantedCluster],
    kcorr: &KCorrTable,
    seed: u64,
) -> Result<SyntheticCatalog> {
    region.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut galaxies = Vec::with_capacity(n_field + clusters.iter().map(|c| c.members + 1).sum::<usize>());
    let mut planted = Vec::with_capacity(clusters.len());
    let mut next_id: u64 = 1;

    for cl in clusters {
        if !region.contains(cl.ra, cl.dec) {
            bail!("planted cluster center ({}, {}) outside region", cl.ra, cl.dec);
        }
        let entry = kcorr.nearest_z(cl.z)?;
        let (sgr, sri) = sigma_pair(entry.i);
        let bcg_objid = next_id;
        galaxies.push(Galaxy {
            objid: bcg_objid,
            ra: cl.ra,
            dec: cl.dec,
            i: entry.i,
            gr: entry.gr,
            ri: entry.ri,
            sigmagr: sgr,
            sigmari: sri,
        });
        next_id += 1;

        // Keep members inside both the counting radius and the r200-scaled
        // retrieval radius so planted members survive end to end.
        let ngal = (cl.members + 1) as f64;
        let retrieval = entry.radius * (0.17 * ngal.powf(0.51));
        let plant_radius = 0.85 * entry.radius.min(retrieval);
        let mut member_objids = Vec::with_capacity(cl.members);
        for _ in 0..cl.members {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let rr = plant_radius * rng.random_range(0.0f64..1.0).sqrt();
            let dec = cl.dec + rr * theta.sin();
            let ra = cl.ra + rr * theta.cos() / (cl.dec.to_radians().cos());
            let i = entry.i + (entry.ilim - entry.i) * rng.random_range(0.05..0.95);
            let gr = entry.gr + 0.9 * 0.05 * rng.random_range(-1.0..1.0);
            let ri = entry.ri + 0.9 * 0.06 * rng.random_range(-1.0..1.0);
            let (sgr, sri) = sigma_pair(i);
            galaxies.push(Galaxy { objid: next_id, ra, dec, i, gr, ri, sigmagr: sgr, sigmari: sri });
            member_objids.push(next_id);
            next_id += 1;
        }
        planted.push(PlantedRecord { bcg_objid, member_objids, z: entry.z });
    }

    for _ in 0..n_field {
        let ra = rng.random_range(region.min_ra..region.max_ra);
        let dec = rng.random_range(region.min_dec..region.max_dec);
        let i = rng.random_range(14.0..22.0);
        let gr = rng.random_range(-0.5..2.5);
        let ri = rng.random_range(-0.5..2.0);
        let (sgr, sri) = sigma_pair(i);
        galaxies.push(Galaxy { objid: next_id, ra, dec, i, gr, ri, sigmagr: sgr, sigmari: sri });
        next_id += 1;
    }

    Ok(SyntheticCatalog { galaxies, planted })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(i: f64) -> RawGalaxy {
        RawGalaxy { objid: 1, ra: 10.0, dec: 0.0, g: 16.0, r: 15.5, i }
    }

    #[test]
    fn derive_colors_are_differences() {
        let g = derive_galaxy(&raw(15.0));
        assert_eq!(g.gr, 0.5);
        assert_eq!(g.ri, 0.5);
    }

    #[test]
    fn derive_sigma_formulas() {
        // Frozen from 2.089*10^(0.228*15-6) and 4.266*10^(0.206*15-6),
        // evaluated independently at high precision.
        let g = derive_galaxy(&raw(15.0));
        assert!((g.sigmagr - 0.005494646).abs() < 1e-7, "sigmagr = {}", g.sigmagr);
        assert!((g.sigmari - 0.005248327).abs() < 1e-7, "sigmari = {}", g.sigmari);
    }

    #[test]
    fn derive_is_pure() {
        let a = derive_galaxy(&raw(17.3));
        let b = derive_galaxy(&raw(17.3));
        assert_eq!(a, b);
    }

    #[test]
    fn sigmas_increase_with_magnitude() {
        let mut prev = derive_galaxy(&raw(10.0));
        let mut m = 10.1;
        while m <= 25.0 {
            let g = derive_galaxy(&raw(m));
            assert!(g.sigmagr > prev.sigmagr && g.sigmagr > 0.0);
            assert!(g.sigmari > prev.sigmari && g.sigmari > 0.0);
            prev = g;
            m += 0.1;
        }
    }

    fn region() -> RegionBounds {
        RegionBounds::new(5.0, 15.0, -2.0, 2.0).unwrap()
    }

    #[test]
    fn ingest_empty_source() {
        let csv = "objid,ra,dec,dered_g,dered_r,dered_i\n";
        let out = ingest_galaxies(csv.as_bytes(), &region()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn ingest_closed_bounds_and_region_filter() {
        let csv = "objid,ra,dec,dered_g,dered_r,dered_i\n\
                   1,5.0,0.0,16,15.5,15\n\
                   2,10.0,5.0,16,15.5,15\n\
                   3,10.0,1.0,16,15.5,15\n";
        let out = ingest_galaxies(csv.as_bytes(), &region()).unwrap();
        // row at ra exactly min_ra included; dec=5 outside dropped
        assert_eq!(out.iter().map(|g| g.objid).collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn ingest_rejects_duplicates_and_malformed() {
        let dup = "objid,ra,dec,dered_g,dered_r,dered_i\n\
                   1,10,0,16,15.5,15\n\
                   1,11,0,16,15.5,15\n";
        let err = ingest_galaxies(dup.as_bytes(), &region()).unwrap_err();
        assert!(err.to_string().contains("duplicate objid 1"), "{err}");

        let bad = "objid,ra,dec,dered_g,dered_r,dered_i\n\
                   1,10,zzz,16,15.5,15\n";
        let err = ingest_galaxies(bad.as_bytes(), &region()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn synthetic_kcorr_shape() {
        let t = generate_synthetic_kcorr(1000, 0.5).unwrap();
        assert_eq!(t.entries.len(), 1000);
        assert!((t.entries[0].z - 0.001).abs() < 1e-12);
        assert!((t.entries[999].z - 1.0).abs() < 1e-12);
        // anchor: 1 Mpc at z=0.05 subtends 0.74/1.78 deg
        let e = t.lookup_z(0.05).unwrap();
        assert!((e.radius - 0.74 / 1.78).abs() < 1e-4, "radius = {}", e.radius);
        assert_eq!(t.max_radius, 0.5);
        // strictly decreasing below the cap
        for w in t.entries.windows(2) {
            if w[0].radius < 0.5 {
                assert!(w[1].radius < w[0].radius);
            }
            assert!(w[1].ilim > w[1].i);
        }
    }

    #[test]
    fn kcorr_rejects_nonmonotone() {
        let mut t = generate_synthetic_kcorr(10, 0.5).unwrap();
        t.entries[4].z = t.entries[3].z;
        let err = KCorrTable::from_entries(t.entries).unwrap_err();
        assert!(err.to_string().contains("row 5"), "{err}");

        let mut t = generate_synthetic_kcorr(200, 0.5).unwrap();
        t.entries[150].radius = t.entries[149].radius + 0.01;
        let err = KCorrTable::from_entries(t.entries).unwrap_err();
        assert!(err.to_string().contains("row 151"), "{err}");
    }

    #[test]
    fn synthetic_catalog_counts_and_determinism() {
        let kcorr = generate_synthetic_kcorr(1000, 0.5).unwrap();
        let reg = region();
        let clusters = [PlantedCluster { ra: 10.0, dec: 0.0, z: 0.1, members: 5 }];
        let a = generate_synthetic_catalog(&reg, 0, &clusters, &kcorr, 7).unwrap();
        assert_eq!(a.galaxies.len(), 6);
        let b = generate_synthetic_catalog(&reg, 0, &clusters, &kcorr, 7).unwrap();
        assert_eq!(a.galaxies, b.galaxies);

        let err = generate_synthetic_catalog(
            &reg,
            0,
            &[PlantedCluster { ra: 100.0, dec: 0.0, z: 0.1, members: 1 }],
            &kcorr,
            7,
        )
        .unwrap_err();
        assert!(err.to_string().contains("outside region"), "{err}");
    }
}
