use serde::{Deserialize, Serialize};

use super::GridError;

/// Mean Earth radius used for every inter-site distance, in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A point on the Earth's surface in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GridError> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !self.lat.is_finite() || !(-90.0..=90.0).contains(&self.lat) {
            return Err(GridError::InvalidCoordinate(format!("latitude {} out of [-90, 90]", self.lat)));
        }
        if !self.lon.is_finite() || !(-180.0..=180.0).contains(&self.lon) {
            return Err(GridError::InvalidCoordinate(format!(
                "longitude {} out of [-180, 180]",
                self.lon
            )));
        }
        Ok(())
    }

    pub fn distance_km(&self, other: &GeoPoint) -> f64 {
        great_circle_distance(*self, *other)
    }
}

/// Haversine great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    // rounding can push h a hair above 1 for antipodes
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Spherical law of cosines on unit vectors; an independent route to the
    /// same metric.
    fn chord_angle_oracle(a: GeoPoint, b: GeoPoint) -> f64 {
        let v = |p: GeoPoint| {
            let (la, lo) = (p.lat.to_radians(), p.lon.to_radians());
            [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
        };
        let (u, w) = (v(a), v(b));
        let cross = [
            u[1] * w[2] - u[2] * w[1],
            u[2] * w[0] - u[0] * w[2],
            u[0] * w[1] - u[1] * w[0],
        ];
        let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
        let cos = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
        EARTH_RADIUS_KM * sin.atan2(cos)
    }

    #[test]
    fn identical_points_are_zero() {
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        assert_eq!(great_circle_distance(p, p), 0.0);
    }

    #[test]
    fn antipodal_on_equator() {
        let d = great_circle_distance(GeoPoint::new(0.0, 0.0).unwrap(), GeoPoint::new(0.0, 180.0).unwrap());
        assert!((d - std::f64::consts::PI * 6371.0).abs() < 1e-9);
        assert!((d - 20015.1).abs() < 0.1);
    }

    #[test]
    fn texas_pair_golden() {
        let a = GeoPoint::new(30.0, -97.0).unwrap();
        let b = GeoPoint::new(32.0, -96.0).unwrap();
        // frozen from the vector-based oracle above
        let golden = 241.94992508868253;
        assert!((chord_angle_oracle(a, b) - golden).abs() < 1e-9);
        assert!((great_circle_distance(a, b) - golden).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..=180.0).prop_map(|(lat, lon)| GeoPoint { lat, lon })
    }

    proptest! {
        #[test]
        fn metric_axioms(a in point(), b in point(), c in point()) {
            let ab = great_circle_distance(a, b);
            let ba = great_circle_distance(b, a);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert_eq!(great_circle_distance(a, a), 0.0);
            let ac = great_circle_distance(a, c);
            let cb = great_circle_distance(c, b);
            prop_assert!(ab <= ac + cb + 1e-6);
        }

        #[test]
        fn agrees_with_vector_oracle(a in point(), b in point()) {
            let d = great_circle_distance(a, b);
            // haversine loses a few digits near antipodes
            prop_assert!((d - chord_angle_oracle(a, b)).abs() < 1e-3);
        }
    }
}
