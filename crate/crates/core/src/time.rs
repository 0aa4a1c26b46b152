//! RFC 3339 UTC timestamps as used in every CSV file.

use chrono::{DateTime, SecondsFormat, Utc};

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s.trim()).map(|t| t.with_timezone(&Utc)).map_err(|e| format!("bad timestamp '{s}': {e}"))
}

/// `2016-07-01T14:00:15Z`, with a fraction only when needed.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for s in ["2016-07-01T14:00:15Z", "2016-07-01T14:00:15.250Z"] {
            assert_eq!(format_timestamp(&parse_timestamp(s).unwrap()), s);
        }
        assert_eq!(format_timestamp(&parse_timestamp("2016-07-01T09:00:00-05:00").unwrap()), "2016-07-01T14:00:00Z");
        assert!(parse_timestamp("2016-07-01 14:00").is_err());
    }
}
