use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const DEFAULT_RADIUS_KM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentCenter {
    pub segment_id: u32,
    pub lat: f64,
    pub lon: f64,
}

/// Great-circle distance on a spherical Earth.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Index into `centers` of the nearest center within `radius_km`.
/// Ties go to the lowest segment id.
pub fn assign_to_segment(lat: f64, lon: f64, centers: &[SegmentCenter], radius_km: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in centers.iter().enumerate() {
        let d = haversine_km(lat, lon, c.lat, c.lon);
        if d > radius_km {
            continue;
        }
        best = match best {
            Some((j, bd)) if bd < d || (bd == d && centers[j].segment_id <= c.segment_id) => Some((j, bd)),
            _ => Some((i, d)),
        };
    }
    best.map(|(i, _)| i)
}

/// Point at `distance_km` from (lat, lon) along `bearing_rad`.
pub fn destination(lat: f64, lon: f64, distance_km: f64, bearing_rad: f64) -> (f64, f64) {
    let d = distance_km / EARTH_RADIUS_KM;
    let p1 = lat.to_radians();
    let l1 = lon.to_radians();
    let p2 = (p1.sin() * d.cos() + p1.cos() * d.sin() * bearing_rad.cos()).asin();
    let l2 = l1 + (bearing_rad.sin() * d.sin() * p1.cos()).atan2(d.cos() - p1.sin() * p2.sin());
    (p2.to_degrees(), ((l2.to_degrees() + 540.0) % 360.0) - 180.0)
}
