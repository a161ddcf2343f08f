//! Declination-zone spatial index and cone search.
//!
//! Objects are bucketed into fixed-height declination bands and sorted by
//! ra within each band. A cone search scans the bands overlapping the
//! query circle, cuts each band to an ra interval, and applies the chord
//! test `chord^2 < 4 sin^2(r/2)`. Reported distances are chord length over
//! deg-per-radian, a small-angle approximation of the true arc.
//!
//! The ra interval arithmetic is plain (no 0/360 wraparound); callers must
//! keep query circles away from the ra = 0/360 seam.

use std::collections::HashMap;

const D2R: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneConfig {
    /// Band height in degrees.
    pub zone_height: f64,
    /// Guards divisions by cos(dec) near the poles.
    pub epsilon: f64,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        // 30 arcsec bands
        ZoneConfig { zone_height: 30.0 / 3600.0, epsilon: 1e-9 }
    }
}

/// One indexed object with its precomputed unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneEntry {
    pub zone_id: i32,
    pub objid: u64,
    pub ra: f64,
    pub dec: f64,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
}

/// A cone-search hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborHit {
    pub objid: u64,
    /// Chord-derived distance in degrees.
    pub distance: f64,
}

/// Band the declination falls in: floor((dec + 90) / h).
pub fn zone_of(dec: f64, config: &ZoneConfig) -> i32 {
    ((dec + 90.0) / config.zone_height).floor() as i32
}

/// Unit-sphere Cartesian coordinates of an equatorial point.
pub fn unit_vector(ra: f64, dec: f64) -> (f64, f64, f64) {
    let (ra, dec) = (ra * D2R, dec * D2R);
    (dec.cos() * ra.cos(), dec.cos() * ra.sin(), dec.sin())
}

/// Immutable zone index. Safe to share across worker threads; all queries
/// are pure reads.
#[derive(Debug, Clone)]
pub struct ZoneTable {
    pub config: ZoneConfig,
    zones: HashMap<i32, Vec<ZoneEntry>>,
    max_zone_id: i32,
}

impl ZoneTable {
    /// Buckets `(objid, ra, dec)` triples into zones and sorts each zone
    /// by ra.
    pub fn build<I>(items: I, config: ZoneConfig) -> ZoneTable
    where
        I: IntoIterator<Item = (u64, f64, f64)>,
    {
        let mut zones: HashMap<i32, Vec<ZoneEntry>> = HashMap::new();
        for (objid, ra, dec) in items {
            let (cx, cy, cz) = unit_vector(ra, dec);
            let zone_id = zone_of(dec, &config);
            zones.entry(zone_id).or_default().push(ZoneEntry {
                zone_id,
                objid,
                ra,
                dec,
                cx,
                cy,
                cz,
            });
        }
        for entries in zones.values_mut() {
            entries.sort_by(|a, b| a.ra.partial_cmp(&b.ra).unwrap());
        }
        let max_zone_id = (180.0 / config.zone_height).floor() as i32;
        ZoneTable { config, zones, max_zone_id }
    }

    pub fn len(&self) -> usize {
        self.zones.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn zone_count(&self) -> usize {
        self.zones.len()
    }

    pub fn zone_entries(&self, zone_id: i32) -> &[ZoneEntry] {
        self.zones.get(&zone_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Objects within `r` degrees of `(ra, dec)` under the chord metric.
    ///
    /// Scan order is (zone, ra); the query point's own object, if indexed,
    /// is returned at distance 0. Distances are strict (`chord^2 < r2`),
    /// the ra/dec window cuts are closed.
    pub fn neighbors(&self, ra: f64, dec: f64, r: f64) -> Vec<NeighborHit> {
        let eps = self.config.epsilon;
        let h = self.config.zone_height;
        let (qx, qy, qz) = unit_vector(ra, dec);
        // radial degrees stretch by 1/cos(dec) away from the equator
        let adjusted_radius = r / (dec.abs() * D2R).cos() + eps;
        let r2 = 4.0 * ((r / 2.0) * D2R).sin().powi(2);

        let center_zone = zone_of(dec, &self.config);
        let min_zone = zone_of(dec - r, &self.config).max(0);
        let max_zone = zone_of(dec + r, &self.config).min(self.max_zone_id);

        let mut hits = Vec::new();
        for zone_id in min_zone..=max_zone {
            let x = if zone_id == center_zone {
                adjusted_radius
            } else {
                // The circle narrows away from the central zone; measure
                // the half-width at the zone edge nearest the query.
                let zone_edge = if zone_id < center_zone { zone_id + 1 } else { zone_id };
                let dec_at_zone = zone_edge as f64 * h - 90.0;
                let delta_dec = (dec - dec_at_zone).abs();
                (r * r - delta_dec * delta_dec).abs().sqrt()
                    / ((dec_at_zone.abs() * D2R).cos() + eps)
            };
            let entries = self.zone_entries(zone_id);
            let (ra_lo, ra_hi) = (ra - x, ra + x);
            let start = entries.partition_point(|e| e.ra < ra_lo);
            for e in &entries[start..] {
                if e.ra > ra_hi {
                    break;
                }
                if e.dec < dec - r || e.dec > dec + r {
                    continue;
                }
                let chord2 = (e.cx - qx).powi(2) + (e.cy - qy).powi(2) + (e.cz - qz).powi(2);
                if r2 > chord2 {
                    hits.push(NeighborHit { objid: e.objid, distance: chord2.sqrt() / D2R });
                }
            }
        }
        hits
    }
}
