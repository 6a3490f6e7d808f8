use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use s2::cellid::CellID;
use s2::latlng::LatLng;
use s2::s1::angle::Deg;

fn cell_at(lat: f64, lng: f64, level: u64) -> CellID {
    let ll = LatLng::new(Deg(lat).into(), Deg(lng).into());
    CellID::from(&ll).parent(level)
}

fn token(id: CellID) -> String {
    format!("{:016x}", id.0).trim_end_matches('0').to_string()
}

fn emit(lat: f64, lng: f64, level: u64) {
    let id = cell_at(lat, lng, level);
    let c = LatLng::from(&id);
    let clat = c.lat.deg();
    let clng = c.lng.deg();
    println!("{},{},{},{:016x},{},{},{}", lat, lng, level, id.0, token(id), clat, clng);
}

fn main() {
    println!("lat,lng,level,id_hex,token,center_lat,center_lng");
    // fixed probes: face centers at level 0
    for &(lat, lng) in &[
        (0.0f64, 0.0f64),   // face 0
        (0.0, 90.0),        // face 1
        (90.0, 0.0),        // face 2
        (0.0, 180.0),       // face 3
        (0.0, -90.0),       // face 4
        (-90.0, 0.0),       // face 5
    ] {
        emit(lat, lng, 0);
    }
    // a few cities at all levels 0..=12
    for &(lat, lng) in &[
        (40.7128f64, -74.0060f64), // NYC
        (48.8566, 2.3522),         // Paris
        (-33.8688, 151.2093),      // Sydney
        (35.6762, 139.6503),       // Tokyo
        (-1.2921, 36.8219),        // Nairobi
    ] {
        for level in 0..=12u64 {
            emit(lat, lng, level);
        }
    }
    // random sphere-uniform points
    let mut rng = ChaCha8Rng::seed_from_u64(20240811);
    for _ in 0..12000 {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let lat = z.asin().to_degrees();
        let lng: f64 = rng.gen_range(-180.0..180.0);
        let level: u64 = rng.gen_range(0..=12);
        emit(lat, lng, level);
    }
}
