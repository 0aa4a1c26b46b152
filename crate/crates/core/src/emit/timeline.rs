use chrono::{DateTime, TimeDelta, Utc};

use super::EmitError;

/// `steps` intervals of `step_s` seconds from `start`, so `steps + 1`
/// instants including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timeline {
    pub start: DateTime<Utc>,
    pub step_s: u32,
    pub steps: usize,
}

impl Timeline {
    pub fn new(start: DateTime<Utc>, step_s: u32, steps: usize) -> Result<Self, EmitError> {
        if step_s == 0 || 60 % step_s != 0 {
            return Err(EmitError::InvalidTimeline(format!("step {step_s} s must divide 60")));
        }
        if steps == 0 {
            return Err(EmitError::InvalidTimeline("horizon must be at least one step".into()));
        }
        if start.timestamp() < 0 {
            return Err(EmitError::InvalidTimeline("start must not precede 1970-01-01".into()));
        }
        Ok(Timeline { start, step_s, steps })
    }

    /// Timeline covering `duration_s` seconds.
    pub fn spanning(start: DateTime<Utc>, step_s: u32, duration_s: u64) -> Result<Self, EmitError> {
        if step_s == 0 || duration_s % u64::from(step_s) != 0 {
            return Err(EmitError::InvalidTimeline(format!("duration {duration_s} s is not a multiple of the step")));
        }
        Self::new(start, step_s, (duration_s / u64::from(step_s)) as usize)
    }

    pub fn frame_count(&self) -> usize {
        self.steps + 1
    }

    pub fn offset_s(&self, i: usize) -> u64 {
        i as u64 * u64::from(self.step_s)
    }

    pub fn instant(&self, i: usize) -> DateTime<Utc> {
        self.start + TimeDelta::seconds(self.offset_s(i) as i64)
    }

    pub fn timestamp_us(&self, i: usize) -> u64 {
        self.instant(i).timestamp_micros() as u64
    }

    /// Steps between re-dispatch instants.
    pub fn steps_per(&self, interval_s: u32) -> Result<usize, EmitError> {
        if interval_s == 0 || interval_s % self.step_s != 0 {
            return Err(EmitError::InvalidTimeline(format!(
                "interval {interval_s} s is not a multiple of the {} s step",
                self.step_s
            )));
        }
        Ok((interval_s / self.step_s) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::parse_timestamp;

    #[test]
    fn ten_minutes_at_fifteen_seconds() {
        let t = Timeline::spanning(parse_timestamp("2016-07-01T14:00:00Z").unwrap(), 15, 600).unwrap();
        assert_eq!(t.frame_count(), 41);
        assert_eq!(crate::time::format_timestamp(&t.instant(40)), "2016-07-01T14:10:00Z");
        assert_eq!(t.steps_per(900).unwrap(), 60);
    }

    #[test]
    fn rejects_bad_steps() {
        let s = parse_timestamp("2016-07-01T14:00:00Z").unwrap();
        assert!(Timeline::new(s, 7, 10).is_err());
        assert!(Timeline::new(s, 15, 0).is_err());
        assert!(Timeline::spanning(s, 15, 20).is_err());
    }
}
