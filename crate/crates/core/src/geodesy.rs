//! Great-circle distance on a sphere.

use crate::cellgrid::LatLng;

/// Mean Earth radius in km, fixed so error metrics are reproducible.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Haversine distance between two points in km. Symmetric, zero iff the
/// normalized coordinates coincide, bounded by half the circumference.
pub fn great_circle_km(a: LatLng, b: LatLng) -> f64 {
    let lat_a = a.lat().to_radians();
    let lat_b = b.lat().to_radians();
    let half_dlat = (lat_b - lat_a) / 2.0;
    let half_dlng = (b.lng() - a.lng()).to_radians() / 2.0;
    let h = half_dlat.sin().powi(2) + lat_a.cos() * lat_b.cos() * half_dlng.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}
