use super::{DayWindow, DemandError, HistoryDay};
use crate::interp::endpoint_line;

/// One day's study hour divided by its endpoint line. Dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledLoadSample {
    pub day_index: usize,
    pub values: Vec<f64>,
}

/// Normalizes `raw` minute loads by the straight line joining the first and
/// last minute, so the result starts and ends at exactly 1.
pub fn scale_day_hour(raw: &[f64]) -> Result<Vec<f64>, DemandError> {
    let m = raw.len();
    if m < 2 {
        return Err(DemandError::InvalidInput(format!("need at least 2 minutes, got {m}")));
    }
    if let Some((i, x)) = raw.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(DemandError::InvalidInput(format!("non-finite load {x} at minute {}", i + 1)));
    }
    let (first, last) = (raw[0], raw[m - 1]);
    raw.iter()
        .enumerate()
        .map(|(i, &x)| {
            let base = endpoint_line(first, last, m, i);
            if base > 0.0 {
                Ok(x / base)
            } else {
                Err(DemandError::Degenerate { minute: i + 1, value: base })
            }
        })
        .collect()
}

/// Scales every history day that falls inside one of `season` (all days when
/// `season` is empty).
pub fn collect_scaled_samples(
    history: &[HistoryDay],
    season: &[DayWindow],
) -> Result<Vec<ScaledLoadSample>, DemandError> {
    history
        .iter()
        .enumerate()
        .filter(|(_, d)| season.is_empty() || season.iter().any(|w| w.contains(d.date)))
        .map(|(i, d)| {
            let values = scale_day_hour(&d.minutes).map_err(|e| match e {
                DemandError::Degenerate { minute, value } => DemandError::InvalidInput(format!(
                    "{}: endpoint line is {value} at minute {minute}",
                    d.date
                )),
                other => other,
            })?;
            Ok(ScaledLoadSample { day_index: i, values })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_input_scales_to_ones() {
        assert_eq!(scale_day_hour(&[100.0, 110.0, 120.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        let line: Vec<f64> = (0..61).map(|i| 50.0 + 0.25 * i as f64).collect();
        for v in scale_day_hour(&line).unwrap() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bump_in_the_middle() {
        // middle minute divides by the line value 110
        let s = scale_day_hour(&[100.0, 120.0, 120.0]).unwrap();
        assert_eq!(s[0], 1.0);
        assert_eq!(s[2], 1.0);
        assert!((s[1] - 120.0 / 110.0).abs() < 1e-15);
        assert!((s[1] - 1.090909090909091).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_line_reports_minute() {
        match scale_day_hour(&[0.0, 1.0, 2.0]) {
            Err(DemandError::Degenerate { minute, .. }) => assert_eq!(minute, 1),
            other => panic!("{other:?}"),
        }
        assert!(scale_day_hour(&[5.0]).is_err());
    }

    proptest! {
        #[test]
        fn endpoints_are_exactly_one(raw in prop::collection::vec(1e-3f64..1e5, 2..200)) {
            let s = scale_day_hour(&raw).unwrap();
            prop_assert_eq!(s[0], 1.0);
            prop_assert_eq!(*s.last().unwrap(), 1.0);
        }
    }
}
