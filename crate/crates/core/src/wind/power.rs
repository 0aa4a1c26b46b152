use super::WindError;
use crate::grid::TurbineCurveParams;

/// Logistic rise to `v_lim`, polynomial drop-off to `v_furl`, zero beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbineCurve {
    pub params: TurbineCurveParams,
    /// Logistic scale, chosen so the output at `v_rated` is `beta`.
    pub alpha1: f64,
    /// Drop-off coefficient, chosen so the output at `v_furl` is 0.
    pub alpha2: f64,
}

impl TurbineCurve {
    pub fn new(params: &TurbineCurveParams) -> Result<Self, WindError> {
        params.check().map_err(|message| WindError::InvalidCurve { id: params.id, message })?;
        let b = params.beta;
        let alpha1 = (params.v_rated - params.v_mid) / (b / (1.0 - b)).ln();
        let alpha2 = (params.v_furl - params.v_lim).powf(-params.alpha3);
        Ok(TurbineCurve { params: params.clone(), alpha1, alpha2 })
    }

    /// Per-unit output at speed `v` (m/s). Negative speeds count as 0.
    pub fn power_output(&self, v: f64) -> f64 {
        let p = &self.params;
        let v = v.max(0.0);
        let out = if v <= p.v_lim {
            1.0 - 1.0 / (1.0 + ((v - p.v_mid) / self.alpha1).exp())
        } else if v <= p.v_furl {
            1.0 - self.alpha2 * (v - p.v_lim).powf(p.alpha3)
        } else {
            0.0
        };
        out.clamp(0.0, 1.0)
    }
}

pub fn farm_power_series(rated_mw: f64, speeds: &[f64], curve: &TurbineCurve) -> Vec<f64> {
    speeds.iter().map(|&v| rated_mw * curve.power_output(v)).collect()
}
