//! Piecewise-polynomial correlation-versus-distance curve.
//!
//! Each segment covers `[start_km, end_km)` and stores ascending-power
//! coefficients in the absolute distance `d`, so a segment `[c0, c1, c2]`
//! evaluates to `c0 + c1*d + c2*d^2`. Segments must tile `[0, max_distance_km]`
//! without gaps. Beyond the cutoff the curve is identically zero.

use serde::{Deserialize, Serialize};

use super::GridError;

const JOIN_TOLERANCE: f64 = 1e-6;
const MONOTONE_PROBE_POINTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSegment {
    pub start_km: f64,
    pub end_km: f64,
    pub coefficients: Vec<f64>,
}

impl CurveSegment {
    fn eval(&self, d: f64) -> f64 {
        // Horner
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * d + c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub max_distance_km: f64,
    pub segments: Vec<CurveSegment>,
}

impl Default for CorrelationCurve {
    /// Two quadratic segments joined with matching value (0.2) and slope at
    /// 300 km, reaching zero with zero slope at 600 km.
    fn default() -> Self {
        CorrelationCurve {
            max_distance_km: 600.0,
            segments: vec![
                CurveSegment {
                    start_km: 0.0,
                    end_km: 300.0,
                    coefficients: vec![1.0, -0.004, 1.0 / 225_000.0],
                },
                CurveSegment {
                    start_km: 300.0,
                    end_km: 600.0,
                    coefficients: vec![0.8, -1.0 / 375.0, 1.0 / 450_000.0],
                },
            ],
        }
    }
}

impl CorrelationCurve {
    pub fn new(max_distance_km: f64, segments: Vec<CurveSegment>) -> Result<Self, GridError> {
        let curve = CorrelationCurve { max_distance_km, segments };
        curve.validate()?;
        Ok(curve)
    }

    /// Correlation at distance `d` km, clamped to `[0, 1]`.
    pub fn correlation(&self, d: f64) -> Result<f64, GridError> {
        if !(d >= 0.0) {
            return Err(GridError::NegativeDistance(d));
        }
        Ok(self.eval_unchecked(d))
    }

    pub(crate) fn eval_unchecked(&self, d: f64) -> f64 {
        if d >= self.max_distance_km {
            return 0.0;
        }
        let seg = self
            .segments
            .iter()
            .find(|s| d >= s.start_km && d < s.end_km)
            .or_else(|| self.segments.last());
        match seg {
            Some(s) => s.eval(d).clamp(0.0, 1.0),
            None => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let bad = |msg: String| Err(GridError::InvalidCurve(msg));
        if !(self.max_distance_km.is_finite() && self.max_distance_km > 0.0) {
            return bad(format!("max_distance_km must be positive, got {}", self.max_distance_km));
        }
        if self.segments.is_empty() {
            return bad("no segments".into());
        }
        let mut cursor = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.coefficients.is_empty() || s.coefficients.iter().any(|c| !c.is_finite()) {
                return bad(format!("segment {i} has empty or non-finite coefficients"));
            }
            if !(s.start_km.is_finite() && s.end_km.is_finite()) || s.start_km >= s.end_km {
                return bad(format!("segment {i} has an empty or invalid interval"));
            }
            if (s.start_km - cursor).abs() > JOIN_TOLERANCE {
                return bad(format!("segment {i} starts at {} but previous ended at {cursor}", s.start_km));
            }
            if i > 0 {
                let prev = &self.segments[i - 1];
                let jump = (prev.eval(s.start_km) - s.eval(s.start_km)).abs();
                if jump > JOIN_TOLERANCE {
                    return bad(format!("discontinuity of {jump} at {} km", s.start_km));
                }
            }
            cursor = s.end_km;
        }
        if (cursor - self.max_distance_km).abs() > JOIN_TOLERANCE {
            return bad(format!("segments end at {cursor}, cutoff is {}", self.max_distance_km));
        }
        if (self.segments[0].eval(0.0) - 1.0).abs() > 1e-9 {
            return bad(format!("rho(0) = {}, expected 1", self.segments[0].eval(0.0)));
        }
        // probe the raw polynomials; clamping would hide a rising segment
        let raw = |d: f64| {
            let s = self.segments.iter().find(|s| d >= s.start_km && d < s.end_km);
            s.or_else(|| self.segments.last()).map_or(0.0, |s| s.eval(d))
        };
        let mut prev = raw(0.0);
        for i in 1..=MONOTONE_PROBE_POINTS {
            let d = self.max_distance_km * i as f64 / MONOTONE_PROBE_POINTS as f64;
            let r = raw(d);
            if r > prev + 1e-12 {
                return bad(format!("curve increases near {d} km"));
            }
            prev = r;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_anchors() {
        let c = CorrelationCurve::default();
        c.validate().unwrap();
        assert_eq!(c.correlation(0.0).unwrap(), 1.0);
        assert_eq!(c.correlation(600.0).unwrap(), 0.0);
        assert_eq!(c.correlation(1e6).unwrap(), 0.0);
    }

    #[test]
    fn default_at_300_km() {
        // 1 - 0.004*300 + 300^2/225000 = 0.2, and 0.8 - 300/375 + 300^2/450000 = 0.2
        let by_hand: f64 = 0.8 - 300.0 / 375.0 + 300.0 * 300.0 / 450_000.0;
        assert!((by_hand - 0.2).abs() < 1e-12);
        assert!((CorrelationCurve::default().correlation(300.0).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn negative_distance_is_rejected() {
        assert!(matches!(
            CorrelationCurve::default().correlation(-1.0),
            Err(GridError::NegativeDistance(_))
        ));
    }

    #[test]
    fn bounded_and_monotone_on_dense_grid() {
        let c = CorrelationCurve::default();
        let mut prev = 1.0;
        for i in 0..=100_000 {
            let r = c.correlation(i as f64 * 0.01).unwrap();
            assert!((0.0..=1.0).contains(&r));
            assert!(r <= prev + 1e-15);
            prev = r;
        }
    }

    #[test]
    fn rejects_discontinuous_join() {
        let mut c = CorrelationCurve::default();
        c.segments[1].coefficients[0] += 0.01;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_increasing_curve() {
        let c = CorrelationCurve {
            max_distance_km: 100.0,
            segments: vec![CurveSegment { start_km: 0.0, end_km: 100.0, coefficients: vec![1.0, 0.001] }],
        };
        assert!(c.validate().is_err());
    }
}
